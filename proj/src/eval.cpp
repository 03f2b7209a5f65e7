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

#include "mcakd/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcakd/error.hpp"
#include "mcakd/parallel.hpp"

namespace mcakd {

namespace {

double to_db(double err, double ref) {
  if (err <= 0.0) return kNmseFloorDb;
  return std::max(10.0 * std::log10(err / ref), kNmseFloorDb);
}

}  // namespace

double nmse_db(const CsiTensor& h_hat, const CsiTensor& h) {
  require(h_hat.dims() == h.dims(), ErrorKind::Contract, "nmse_db: dims differ");
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < h.data().size(); ++i) {
    const std::complex<double> ref_v(h.data()[i]);
    err += std::norm(std::complex<double>(h_hat.data()[i]) - ref_v);
    ref += std::norm(ref_v);
  }
  require(ref > 0.0, ErrorKind::Degenerate, "nmse_db: zero-norm reference");
  return to_db(err, ref);
}

double nmse_masked_db(const CsiTensor& h_hat, const CsiTensor& h, const MaskSet& mask,
                      const PatchSpec& spec) {
  require(h_hat.dims() == h.dims(), ErrorKind::Contract, "nmse_masked_db: dims differ");
  const auto coords = token_grid(h.dims(), spec);
  double err = 0.0;
  double ref = 0.0;
  for (int g : mask.masked_idx) {
    const auto& c = coords[g];
    for (int dt = 0; dt < spec.p_t; ++dt)
      for (int dk = 0; dk < spec.p_k; ++dk)
        for (int dn = 0; dn < spec.p_n; ++dn) {
          const int t = c.t * spec.p_t + dt, k = c.k * spec.p_k + dk, n = c.n * spec.p_n + dn;
          const std::complex<double> ref_v(h(t, k, n));
          err += std::norm(std::complex<double>(h_hat(t, k, n)) - ref_v);
          ref += std::norm(ref_v);
        }
  }
  require(ref > 0.0, ErrorKind::Degenerate, "nmse_masked_db: zero-norm masked reference");
  return to_db(err, ref);
}

CsiTensor persistence_baseline(const CsiTensor& h, const TaskSpec& task) {
  const auto& d = h.dims();
  task.validate(d);
  CsiTensor out = h;
  const int last = task.boundary - 1;
  for (int t = 0; t < d.T; ++t)
    for (int k = 0; k < d.K; ++k)
      for (int n = 0; n < d.N; ++n) {
        if (task.kind == TaskKind::Time && t > last) out(t, k, n) = h(last, k, n);
        if (task.kind == TaskKind::Frequency && k > last) out(t, k, n) = h(t, last, n);
      }
  return out;
}

Predictor model_predictor(const ModelState& state) {
  return [&state](const CsiTensor& h, const MaskSet& mask) { return forward(h, mask, state).h_hat; };
}

EvalReport evaluate(const Predictor& predictor, const std::vector<const CsiTensor*>& samples,
                    const PatchSpec& spec, const std::vector<TaskSpec>& tasks, int threads) {
  EvalReport report;
  for (const auto& task : tasks) {
    TaskResult r;
    r.task = task;
    r.samples = samples.size();
    if (samples.empty()) {
      report.tasks.push_back(r);
      continue;
    }
    const MaskSet mask = task_mask(task, samples.front()->dims(), spec);
    std::vector<double> full(samples.size()), masked(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
      const CsiTensor& h = *samples[i];
      const CsiTensor h_hat = predictor(h, mask);
      full[i] = nmse_db(h_hat, h);
      masked[i] = nmse_masked_db(h_hat, h, mask, spec);
    });
    r.nmse_db = std::accumulate(full.begin(), full.end(), 0.0) / samples.size();
    r.nmse_masked_db = std::accumulate(masked.begin(), masked.end(), 0.0) / samples.size();
    report.tasks.push_back(r);
  }
  return report;
}

EvalReport evaluate(const ModelState& state, const Dataset& ds, Split split,
                    const std::vector<TaskSpec>& tasks, int threads) {
  check_compatible(state.config, ds.dims);
  std::vector<const CsiTensor*> samples;
  for (auto i : ds.indices(split)) samples.push_back(&ds.samples[i]);
  EvalReport report =
      evaluate(model_predictor(state), samples, state.config.patch, tasks, threads);
  report.dataset = ds.name;
  report.split = to_string(split);
  report.param_count = count_params(state.config);
  return report;
}

LatencyStats latency_stats(std::vector<double> samples_ms, int batch) {
  require(!samples_ms.empty(), ErrorKind::Config, "latency stats need at least one repetition");
  LatencyStats s;
  s.batch = batch;
  s.repetitions = static_cast<int>(samples_ms.size());
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / samples_ms.size();
  std::vector<double> sorted = samples_ms;
  std::sort(sorted.begin(), sorted.end());
  auto rank = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * sorted.size()));
    return sorted[std::clamp<std::size_t>(idx, 1, sorted.size()) - 1];
  };
  s.p50_ms = rank(0.50);
  s.p95_ms = rank(0.95);
  s.samples_ms = std::move(samples_ms);
  return s;
}

LatencyStats bench(const ModelState& state, const CsiTensor& sample, int batch, int repetitions,
                   int warmup) {
  require(repetitions >= 1, ErrorKind::Config, "bench: repetitions must be >= 1");
  require(batch >= 1 && warmup >= 0, ErrorKind::Config, "bench: batch >= 1 and warmup >= 0");
  check_compatible(state.config, sample.dims());
  const TaskSpec task{TaskKind::Time, sample.dims().T / 2};
  const MaskSet mask = task_mask(task, sample.dims(), state.config.patch);
  const TokenBatch tb = patchify(sample, state.config.patch);
  auto run_batch = [&] {
    float sink = 0.0f;
    for (int b = 0; b < batch; ++b) {
      const auto pass = forward_tokens<float>(state.params, state.config, tb.tokens, tb.coords, mask);
      sink += pass.out(0, 0);
    }
    return sink;
  };
  volatile float guard = 0.0f;
  for (int i = 0; i < warmup; ++i) guard = guard + run_batch();
  std::vector<double> times;
  times.reserve(repetitions);
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    guard = guard + run_batch();
    times.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return latency_stats(std::move(times), batch);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["split"] = split;
  j["aggregation"] = aggregation;
  j["param_count"] = param_count;
  j["config_fingerprint"] = config_fingerprint;
  j["model_fingerprint"] = model_fingerprint;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : tasks)
    j["tasks"].push_back({{"kind", to_string(t.task.kind)},
                          {"boundary", t.task.boundary},
                          {"nmse_db", t.nmse_db},
                          {"nmse_masked_db", t.nmse_masked_db},
                          {"samples", t.samples}});
  if (latency)
    j["latency"] = {{"batch", latency->batch},
                    {"repetitions", latency->repetitions},
                    {"mean_ms", latency->mean_ms},
                    {"p50_ms", latency->p50_ms},
                    {"p95_ms", latency->p95_ms}};
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "dataset,split,task,boundary,nmse_db,nmse_masked_db,samples,param_count,aggregation,"
        "config_fingerprint,model_fingerprint\n";
  for (const auto& t : tasks)
    os << dataset << ',' << split << ',' << to_string(t.task.kind) << ',' << t.task.boundary << ','
       << t.nmse_db << ',' << t.nmse_masked_db << ',' << t.samples << ',' << param_count << ','
       << aggregation << ',' << config_fingerprint << ',' << model_fingerprint << '\n';
  return os.str();
}

}  // namespace mcakd
