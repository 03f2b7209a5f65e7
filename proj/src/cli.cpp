// Copyright 2026 The MCAKD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mcakd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcakd/config.hpp"
#include "mcakd/distill.hpp"
#include "mcakd/error.hpp"
#include "mcakd/eval.hpp"
#include "mcakd/hash.hpp"
#include "mcakd/json_io.hpp"
#include "mcakd/parallel.hpp"
#include "mcakd/train.hpp"

namespace mcakd {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Io:
    case ErrorKind::Format: return 3;
    case ErrorKind::Numeric: return 4;
    case ErrorKind::Contract:
    case ErrorKind::Degenerate: return 5;
  }
  return 1;
}

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> emit;
  std::string role = "teacher";
  std::string data;
  std::string teacher;
  std::string ckpt;
  std::string ckpt2;
  std::string split;
  std::vector<std::string> ablate;
  int batch = 4;
};

// Collects artifacts and writes the run manifest.
class Run {
 public:
  Run(std::string command, ExperimentConfig cfg, const Options& opt, std::ostream& log)
      : command_(std::move(command)),
        cfg_(std::move(cfg)),
        dir_(opt.out),
        log_(log),
        start_(std::chrono::steady_clock::now()) {
    fingerprint_ = cfg_.fingerprint();
    emit_.insert(opt.emit.begin(), opt.emit.end());
    if (emit_.empty()) emit_ = {"csv", "json"};
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir_.string());
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  const std::string& fingerprint() const { return fingerprint_; }
  bool emits(const char* kind) const { return emit_.count(kind) > 0; }
  fs::path path(const std::string& name) const { return dir_ / name; }
  std::ostream& log() { return log_; }

  void record(const std::string& name) {
    artifacts_.push_back({{"path", name}, {"sha256", file_sha256(path(name))}});
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream os(path(name), std::ios::trunc | std::ios::binary);
    if (!os) fail(ErrorKind::Io, "cannot open " + path(name).string() + " for writing");
    os << content;
    os.close();
    if (!os) fail(ErrorKind::Io, "write failed: " + path(name).string());
    record(name);
  }

  void finish() {
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    json m = {{"command", command_},
              {"config_fingerprint", fingerprint_},
              {"seed", cfg_.seed},
              {"versions",
               {{"mcakd", kVersion},
                {"checkpoint", kCheckpointVersion},
                {"dataset", kDatasetVersion}}},
              {"wall_ms", wall_ms},
              {"artifacts", artifacts_}};
    std::ofstream os(path("manifest.json"), std::ios::trunc);
    if (!os) fail(ErrorKind::Io, "cannot write manifest in " + dir_.string());
    os << m.dump(2) << "\n";
  }

 private:
  std::string command_;
  ExperimentConfig cfg_;
  std::string fingerprint_;
  fs::path dir_;
  std::ostream& log_;
  std::set<std::string> emit_;
  json artifacts_ = json::array();
  std::chrono::steady_clock::time_point start_;
};

ExperimentConfig load_with_overrides(const Options& opt) {
  require(!opt.config.empty(), ErrorKind::Config, "--config is required");
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) {
    if (cfg.data.gen.seed == cfg.seed) cfg.data.gen.seed = *opt.seed;
    cfg.seed = *opt.seed;
  }
  for (const auto& a : opt.ablate) apply_ablation(cfg, a);
  cfg.validate();
  return cfg;
}

int threads_for(const ExperimentConfig& cfg) {
  return cfg.train.threads > 0 ? cfg.train.threads : worker_threads();
}

Dataset acquire_dataset(const Run& run, const std::string& prefix) {
  const auto& cfg = run.cfg();
  if (!prefix.empty()) {
    Dataset ds = load_dataset(prefix);
    require(ds.dims == cfg.data.gen.dims(), ErrorKind::Contract,
            "dataset " + prefix + " dims do not match the config [data] section");
    return ds;
  }
  Dataset ds = generate_dataset(cfg.data.gen, cfg.data.counts, cfg.data.norm, threads_for(cfg));
  ds.name = cfg.data.name;
  ds.fingerprint = run.fingerprint();
  return ds;
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail(ErrorKind::Config, "unknown split '" + s + "'");
}

std::string series_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,phase,loss,val_mse,val_nmse_time_db,val_nmse_freq_db\n";
  for (const auto& m : metrics)
    os << m.epoch << ',' << to_string(m.phase) << ',' << m.loss << ',' << m.val_mse << ','
       << m.val_nmse_time_db << ',' << m.val_nmse_freq_db << '\n';
  return os.str();
}

EpochCallback progress(std::ostream& log, const char* label) {
  return [&log, label](const EpochMetrics& m) {
    log << label << " epoch " << m.epoch << " [" << to_string(m.phase) << "] loss=" << m.loss
        << " val_nmse_time=" << m.val_nmse_time_db << "dB\n";
  };
}

void write_training(Run& run, const TrainResult& res, const std::string& stem,
                    const std::string& selection) {
  save_checkpoint(res.state, run.path(stem + ".ckpt"), run.fingerprint());
  run.record(stem + ".ckpt");
  if (run.emits("csv"))
    run.write(stem + "_metrics.csv", metrics_csv(res.metrics, selection, run.fingerprint()));
  if (run.emits("json")) {
    json j = {{"config_fingerprint", run.fingerprint()},
              {"teacher_forwards", res.teacher_forwards},
              {"passive_samples", res.passive_samples},
              {"epochs", res.metrics.size()}};
    run.write(stem + "_summary.json", j.dump(2) + "\n");
  }
  if (run.emits("plots")) run.write(stem + "_series.csv", series_csv(res.metrics));
}

ModelState load_role_checkpoint(const std::string& path, const ExperimentConfig& cfg,
                                const char* what) {
  require(!path.empty(), ErrorKind::Config, std::string("--") + what + " is required");
  ModelState st = load_checkpoint(path);
  const ModelConfig& expected = st.role == Role::Teacher ? cfg.teacher.model : cfg.student.model;
  bool ok = st.config == expected;
  if (!ok)
    for (const auto& v : cfg.tradeoff) ok = ok || st.config == cfg.tradeoff_model(v);
  require(ok, ErrorKind::Contract,
          std::string(what) + " checkpoint architecture does not match the config [" +
              to_string(st.role) + "] section");
  return st;
}

void cmd_gen_data(Run& run, const Options& opt) {
  Dataset ds = acquire_dataset(run, "");
  save_dataset(ds, run.path("dataset"));
  run.record("dataset.csi");
  run.record("dataset.json");
  run.log() << "wrote " << ds.size() << " samples to " << run.path("dataset").string() << "\n";
  (void)opt;
}

void cmd_pretrain(Run& run, const Options& opt) {
  const Role role = role_from_string(opt.role);
  const auto& cfg = run.cfg();
  Dataset ds = acquire_dataset(run, opt.data);
  const RoleSection& rs = role == Role::Teacher ? cfg.teacher : cfg.student;
  TrainResult res = train_self_supervised(ds, rs.model, role, cfg.train_config(role),
                                          progress(run.log(), to_string(role)));
  write_training(run, res, to_string(role), "none");
}

void cmd_distill(Run& run, const Options& opt) {
  const auto& cfg = run.cfg();
  // Architecture preconditions are checked before any data or training work.
  check_distill_compatible(cfg.teacher.model, cfg.student.model);
  ModelState teacher_state = load_role_checkpoint(opt.teacher, cfg, "teacher");
  require(teacher_state.role == Role::Teacher, ErrorKind::Contract,
          "--teacher checkpoint has role " + std::string(to_string(teacher_state.role)));
  check_distill_compatible(teacher_state.config, cfg.student.model);
  Dataset ds = acquire_dataset(run, opt.data);
  FrozenTeacher teacher(teacher_state);
  AlPlSchedule sched = cfg.schedule;
  sched.total_epochs = cfg.student.epochs;
  TrainResult res = distill_student(ds, teacher, cfg.student.model,
                                    cfg.train_config(Role::Student), sched,
                                    progress(run.log(), "student"));
  write_training(run, res, "student", cfg.distill.caks ? "caks" : "prefix");
}

void cmd_eval(Run& run, const Options& opt) {
  const auto& cfg = run.cfg();
  ModelState st = load_role_checkpoint(opt.ckpt, cfg, "ckpt");
  Dataset ds = acquire_dataset(run, opt.data);
  const std::string split_name = opt.split.empty() ? cfg.eval.split : opt.split;
  const Split split = split_from_string(split_name);
  const auto tasks = cfg.tasks();
  const int threads = threads_for(cfg);

  EvalReport report = evaluate(st, ds, split, tasks, threads);
  report.dataset = ds.name;
  report.config_fingerprint = run.fingerprint();
  report.model_fingerprint = file_sha256(opt.ckpt);

  std::vector<const CsiTensor*> samples;
  for (auto i : ds.indices(split)) samples.push_back(&ds.samples[i]);
  Predictor persist = [&](const CsiTensor& h, const MaskSet& mask) {
    const TaskKind kind = mask.strategy == MaskStrategy::Time ? TaskKind::Time : TaskKind::Frequency;
    const int x = mask.boundary;
    return persistence_baseline(h, TaskSpec{kind, x});
  };
  EvalReport baseline = evaluate(persist, samples, st.config.patch, tasks, threads);
  baseline.dataset = ds.name;
  baseline.split = split_name;
  baseline.config_fingerprint = run.fingerprint();
  baseline.model_fingerprint = "persistence";

  for (const auto& t : report.tasks)
    run.log() << (t.task.kind == TaskKind::Time ? "time" : "frequency") << " X=" << t.task.boundary
              << " nmse=" << t.nmse_db << "dB\n";
  if (run.emits("json")) {
    json j = report.to_json();
    j["baseline"] = baseline.to_json();
    run.write("report.json", j.dump(2) + "\n");
  }
  if (run.emits("csv")) {
    run.write("report.csv", report.to_csv());
    run.write("baseline.csv", baseline.to_csv());
  }
}

void cmd_bench(Run& run, const Options& opt) {
  const auto& cfg = run.cfg();
  ModelState st = load_role_checkpoint(opt.ckpt, cfg, "ckpt");
  const CsiTensor sample = generate_channel(cfg.data.gen, cfg.data.gen.seed);
  const auto& e = cfg.eval;
  LatencyStats a = bench(st, sample, e.bench_batch, e.bench_reps, e.bench_warmup);
  auto stats_json = [](const LatencyStats& s, const ModelState& m) {
    return json{{"batch", s.batch},     {"repetitions", s.repetitions},
                {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms},
                {"p95_ms", s.p95_ms},   {"params", count_params(m.config)}};
  };
  json j = {{"config_fingerprint", run.fingerprint()}, {"model", stats_json(a, st)}};
  run.log() << "mean " << a.mean_ms << " ms, p50 " << a.p50_ms << " ms, p95 " << a.p95_ms
            << " ms\n";
  if (!opt.ckpt2.empty()) {
    ModelState other = load_role_checkpoint(opt.ckpt2, cfg, "ckpt2");
    LatencyStats b = bench(other, sample, e.bench_batch, e.bench_reps, e.bench_warmup);
    j["reference"] = stats_json(b, other);
    j["latency_ratio"] = b.mean_ms > 0 ? a.mean_ms / b.mean_ms : 0.0;
    run.log() << "ratio vs reference " << j["latency_ratio"].get<double>() << "\n";
  }
  run.write("bench.json", j.dump(2) + "\n");
}

double flat_cosine(const Mat& a, const Mat& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return static_cast<double>((a.array() * b.array()).sum()) / (na * nb);
}

void cmd_inspect(Run& run, const Options& opt) {
  const auto& cfg = run.cfg();
  ModelState t = load_role_checkpoint(opt.teacher, cfg, "teacher");
  ModelState s = load_role_checkpoint(opt.ckpt, cfg, "ckpt");
  check_distill_compatible(t.config, s.config);
  require(opt.batch >= 1, ErrorKind::Config, "--batch must be >= 1");
  Dataset ds = acquire_dataset(run, opt.data);
  auto idx = ds.indices(Split::Val);
  if (idx.empty()) idx = ds.indices(Split::Train);
  require(!idx.empty(), ErrorKind::Config, "dataset has no samples to inspect");

  const TrainConfig tc = cfg.train_config(Role::Student);
  // The projections are not updated by training, so re-deriving them from the
  // seed reproduces the modules used during distillation.
  const CaKsSet caks = init_caks_set(t.config.dim, s.config.dim, tc.caks_dim,
                                     tc.caks_heads > 0 ? tc.caks_heads : s.config.heads,
                                     derive_seed(tc.seed, 4));
  const TaskSpec task = cfg.tasks().front();

  std::ostringstream scores, cosines;
  scores.precision(9);
  cosines.precision(9);
  scores << "sample,site,teacher_dim,score,rank,config_fingerprint\n";
  cosines << "sample,stack,layer,head,cosine,config_fingerprint\n";
  const std::size_t n = std::min<std::size_t>(opt.batch, idx.size());
  for (std::size_t b = 0; b < n; ++b) {
    const CsiTensor& h = ds.samples[idx[b]];
    const MaskSet mask = task_mask(task, h.dims(), s.config.patch);
    const Reconstruction rt = forward(h, mask, t);
    const Reconstruction rs = forward(h, mask, s);
    auto dump_site = [&](const Mat& te, const Mat& se, const CaKsState<float>& ck) {
      Selection<float> sel = ca_ks_select(te, se, ck);
      std::vector<int> rank(te.cols(), -1);
      for (std::size_t r = 0; r < sel.indices.size(); ++r) rank[sel.indices[r]] = static_cast<int>(r);
      for (int d = 0; d < te.cols(); ++d)
        scores << idx[b] << ',' << to_string(ck.site) << ',' << d << ',' << sel.scores[d] << ','
               << rank[d] << ',' << run.fingerprint() << '\n';
    };
    dump_site(rt.taps.embedding, rs.taps.embedding, caks.embedding);
    dump_site(rt.taps.hidden_enc, rs.taps.hidden_enc, caks.encoder);
    dump_site(rt.taps.hidden_dec, rs.taps.hidden_dec, caks.decoder);
    auto dump_attn = [&](const char* stack, const AttnMaps& ta, const AttnMaps& sa) {
      for (std::size_t l = 0; l < ta.size(); ++l)
        for (std::size_t hd = 0; hd < ta[l].size(); ++hd)
          cosines << idx[b] << ',' << stack << ',' << l << ',' << hd << ','
                  << flat_cosine(ta[l][hd], sa[l][hd]) << ',' << run.fingerprint() << '\n';
    };
    dump_attn("encoder", rt.taps.attn_enc, rs.taps.attn_enc);
    dump_attn("decoder", rt.taps.attn_dec, rs.taps.attn_dec);
  }
  run.write("caks_scores.csv", scores.str());
  run.write("attention_cosine.csv", cosines.str());
  run.log() << "inspected " << n << " samples\n";
}

void cmd_params(Run& run, const Options&) {
  const auto& cfg = run.cfg();
  json j = {{"config_fingerprint", run.fingerprint()},
            {"teacher", count_params(cfg.teacher.model)},
            {"student", count_params(cfg.student.model)}};
  run.log() << "teacher " << count_params(cfg.teacher.model) << "\nstudent "
            << count_params(cfg.student.model) << "\n";
  for (const auto& v : cfg.tradeoff) {
    const auto p = count_params(cfg.tradeoff_model(v));
    j["tradeoff"][v.name] = p;
    run.log() << v.name << " " << p << "\n";
  }
  run.write("params.json", j.dump(2) + "\n");
}

const char* category(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Degenerate: return "degenerate";
  }
  return "internal";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Multi-component attention-based knowledge distillation for CSI prediction",
               "mcakd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.add_option("--config", opt.config, "Experiment config (TOML or JSON)");
  app.add_option("--seed", opt.seed, "Override the global seed");
  app.add_option("--out", opt.out, "Output directory");
  app.add_option("--emit", opt.emit, "Outputs to write: csv, json, plots")
      ->check(CLI::IsMember({"csv", "json", "plots"}));

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  auto* pre = app.add_subcommand("pretrain", "Self-supervised masked-reconstruction training");
  pre->add_option("--role", opt.role, "teacher or student")
      ->check(CLI::IsMember({"teacher", "student"}));
  pre->add_option("--data", opt.data, "Dataset prefix (default: generate from config)");
  auto* dis = app.add_subcommand("distill", "Train the student under AL-PL with a frozen teacher");
  dis->add_option("--teacher", opt.teacher, "Teacher checkpoint")->required();
  dis->add_option("--data", opt.data, "Dataset prefix");
  dis->add_option("--ablate", opt.ablate, "Disable a component")
      ->check(CLI::IsMember({"embed", "attn", "hs", "caks", "alpl"}));
  auto* ev = app.add_subcommand("eval", "Task-level NMSE evaluation");
  ev->add_option("--ckpt", opt.ckpt, "Checkpoint")->required();
  ev->add_option("--data", opt.data, "Dataset prefix");
  ev->add_option("--split", opt.split, "train, val or test");
  auto* be = app.add_subcommand("bench", "Forward latency benchmark");
  be->add_option("--ckpt", opt.ckpt, "Checkpoint")->required();
  be->add_option("--ckpt2", opt.ckpt2, "Reference checkpoint for the latency ratio");
  auto* ins = app.add_subcommand("inspect", "Dump CA-KS scores and attention agreement");
  ins->add_option("--teacher", opt.teacher, "Teacher checkpoint")->required();
  ins->add_option("--ckpt", opt.ckpt, "Student checkpoint")->required();
  ins->add_option("--data", opt.data, "Dataset prefix");
  ins->add_option("--batch", opt.batch, "Number of samples");
  auto* par = app.add_subcommand("params", "Report parameter counts");
  for (auto* sub : {gen, pre, dis, ev, be, ins, par}) sub->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[config]: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    ExperimentConfig cfg = load_with_overrides(opt);
    CLI::App* sub = app.get_subcommands().front();
    Run run(sub->get_name(), std::move(cfg), opt, out);
    if (sub == gen) cmd_gen_data(run, opt);
    else if (sub == pre) cmd_pretrain(run, opt);
    else if (sub == dis) cmd_distill(run, opt);
    else if (sub == ev) cmd_eval(run, opt);
    else if (sub == be) cmd_bench(run, opt);
    else if (sub == ins) cmd_inspect(run, opt);
    else cmd_params(run, opt);
    run.finish();
    return 0;
  } catch (const Error& e) {
    err << "error[" << category(e.kind()) << "]: " << one_line(e.what()) << "\n";
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error[io]: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error[internal]: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace mcakd
