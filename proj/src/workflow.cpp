#include "floodline/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "floodline/errors.hpp"
#include "floodline/stats.hpp"

namespace floodline::ml {

std::string_view to_string(WorkflowMode m) {
  return m == WorkflowMode::batch_standard ? "batch_standard" : "tuning_extended";
}

WorkflowMode parse_workflow_mode(std::string_view s) {
  if (s == "batch_standard") return WorkflowMode::batch_standard;
  if (s == "tuning_extended") return WorkflowMode::tuning_extended;
  throw InputError("unknown workflow '" + std::string(s) + "'");
}

std::vector<Hyperparams> search_space(Algo algo) {
  std::vector<Hyperparams> out;
  const int trees[] = {50, 100, 200, 300, 500};
  const int leaves[] = {1, 2, 4, 8};
  if (algo == Algo::random_forest) {
    const std::optional<int> depths[] = {4, 6, 8, 12, 16, std::nullopt};
    const int subsets[] = {4, 5, 0};
    for (int t : trees)
      for (auto d : depths)
        for (int l : leaves)
          for (int s : subsets) out.push_back({Algo::random_forest, t, d, l, s, 0.0});
  } else {
    const double etas[] = {0.01, 0.03, 0.05, 0.1, 0.2, 0.3};
    const int depths[] = {2, 3, 4, 6};
    for (int t : trees)
      for (double e : etas)
        for (int d : depths)
          for (int l : leaves) out.push_back({Algo::gradient_boost, t, d, l, 0, e});
  }
  return out;
}

Hyperparams batch_hyperparams(Algo algo) {
  if (algo == Algo::random_forest) return {Algo::random_forest, 300, std::nullopt, 1, 5, 0.0};
  return {Algo::gradient_boost, 300, 3, 1, 0, 0.1};
}

Candidate evaluate_candidate(const Dataset& rows, const Hyperparams& hyper, const OutlierConfig& outlier,
                             std::size_t k_folds, const RngStream& stream, Execution exec) {
  Candidate c;
  c.hyper = hyper;
  c.outlier = outlier;
  c.n_train = rows.size();

  const auto split = holdout_split(rows.size(), stream.child("holdout"));
  const Dataset train = rows.subset(split.train);
  const Dataset val = rows.subset(split.validation);
  const auto model = fit_model(train.x, train.y, hyper, stream.child("holdout-model"), exec);
  c.holdout = metrics(model.predict(val.x, exec), val.y);

  c.r2_cv = kfold_cv(rows.x, rows.y, hyper, k_folds, stream.child("cv"), exec).r2_cv;
  if (c.holdout.r2 && c.r2_cv) c.gap = *c.holdout.r2 - *c.r2_cv;
  return c;
}

std::optional<std::size_t> select_best(const std::vector<Candidate>& candidates, double tie_window) {
  std::optional<double> best;
  for (const auto& c : candidates) {
    if (c.r2_cv && (!best || *c.r2_cv > *best)) best = c.r2_cv;
  }
  if (!best) return std::nullopt;

  std::optional<std::size_t> pick;
  double pick_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c.r2_cv || *c.r2_cv < *best - tie_window) continue;
    const double g = c.gap ? std::abs(*c.gap) : std::numeric_limits<double>::infinity();
    if (!pick || g < pick_gap) {
      pick = i;
      pick_gap = g;
    }
  }
  return pick;
}

std::vector<SearchCell> randomized_search(const Dataset& cleaned, std::span<const Algo> algos,
                                          const SearchOptions& options, const RngStream& stream) {
  const auto configs = standard_outlier_configs();
  std::vector<SearchCell> cells;
  std::vector<Dataset> cell_rows;

  struct Job {
    std::size_t cell;
    Hyperparams hyper;
  };
  std::vector<Job> jobs;

  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    const auto applied = apply_outliers(cleaned, configs[ci]);
    for (Algo algo : algos) {
      SearchCell cell;
      cell.outlier = configs[ci];
      cell.algo = algo;
      const std::size_t cell_index = cells.size();
      if (!applied.applicable) {
        cell.applicable = false;
        cell.skipped_reason = applied.reason;
      } else if (applied.rows.size() < options.k_folds) {
        cell.applicable = false;
        cell.skipped_reason = "fewer rows than folds after outlier handling";
      } else {
        const auto space = search_space(algo);
        Pcg32 rng = stream.child(cell_index).child("sample").engine();
        const auto n_iter = static_cast<std::uint32_t>(std::max(0, options.n_iter));
        for (auto idx : rng.sample_without_replacement(static_cast<std::uint32_t>(space.size()), n_iter)) {
          jobs.push_back({cell_index, space[idx]});
        }
      }
      cells.push_back(std::move(cell));
      cell_rows.push_back(applied.rows);
    }
  }

  std::vector<Candidate> results(jobs.size());
  const auto n_jobs = static_cast<long long>(jobs.size());
  auto run = [&](long long j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    results[static_cast<std::size_t>(j)] = evaluate_candidate(cell_rows[job.cell], job.hyper, cells[job.cell].outlier,
                                                              options.k_folds, stream.child(job.cell));
  };
  if (options.exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long j = 0; j < n_jobs; ++j) run(j);
  } else {
    for (long long j = 0; j < n_jobs; ++j) run(j);
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) cells[jobs[j].cell].evaluated.push_back(std::move(results[j]));
  for (auto& cell : cells) cell.best = select_best(cell.evaluated, options.tie_window);
  return cells;
}

GateDecision select_and_gate(const std::vector<Candidate>& candidates, double threshold, double tie_window) {
  GateDecision d;
  d.selected = select_best(candidates, tie_window);
  for (const auto& c : candidates) {
    if (c.r2_cv && (!d.best_r2_cv || *c.r2_cv > *d.best_r2_cv)) d.best_r2_cv = c.r2_cv;
  }
  d.gate_passed = d.selected.has_value() && d.best_r2_cv && *d.best_r2_cv >= threshold;
  return d;
}

namespace {

void fill_report(ModelReport& r, const Candidate& c) {
  r.chosen = c;
  r.n_train = c.n_train;
  r.rmse_m = c.holdout.rmse;
  r.rmse_pct = c.holdout.rmse_pct;
  r.r2 = c.holdout.r2;
  r.r2_cv = c.r2_cv;
  r.gap = c.gap;
  r.selected = true;
}

}  // namespace

WorkflowResult run_workflow(const std::string& aoi_id, const Dataset& training, const Dataset& prediction_rows,
                            const WorkflowOptions& options, const RngStream& stream) {
  WorkflowResult out;
  out.report.aoi_id = aoi_id;
  out.report.workflow = options.mode;

  const Dataset cleaned = clean_targets(training, {}, &out.cleaned_out);
  if (cleaned.size() < options.k_folds || cleaned.size() < 2) {
    out.report.n_train = cleaned.size();
    out.report.note = "too few training rows";
    return out;
  }

  std::optional<Candidate> chosen;
  if (options.mode == WorkflowMode::batch_standard) {
    const auto cfg = OutlierConfig::iqr(3.0);
    const auto applied = apply_outliers(cleaned, cfg);
    if (!applied.applicable || applied.rows.size() < options.k_folds) {
      out.report.n_train = applied.rows.size();
      out.report.note = applied.applicable ? "too few rows after outlier filter" : applied.reason;
      return out;
    }
    const RngStream batch = stream.child("batch");
    // Both models share the hold-out split; the higher hold-out R^2 is kept.
    for (Algo algo : {Algo::random_forest, Algo::gradient_boost}) {
      Candidate c;
      c.hyper = batch_hyperparams(algo);
      c.outlier = cfg;
      c.n_train = applied.rows.size();
      const auto split = holdout_split(applied.rows.size(), batch.child("holdout"));
      const Dataset train = applied.rows.subset(split.train);
      const Dataset val = applied.rows.subset(split.validation);
      const auto model = fit_model(train.x, train.y, c.hyper, batch.child("holdout-model"), options.exec);
      c.holdout = metrics(model.predict(val.x, options.exec), val.y);
      out.batch_candidates.push_back(std::move(c));
    }
    const auto& rf = out.batch_candidates[0];
    const auto& gb = out.batch_candidates[1];
    const bool take_gb = gb.holdout.r2 && (!rf.holdout.r2 || *gb.holdout.r2 > *rf.holdout.r2);
    Candidate& kept = out.batch_candidates[take_gb ? 1 : 0];
    kept.r2_cv = kfold_cv(applied.rows.x, applied.rows.y, kept.hyper, options.k_folds, batch.child("cv"),
                          options.exec)
                     .r2_cv;
    if (kept.holdout.r2 && kept.r2_cv) kept.gap = *kept.holdout.r2 - *kept.r2_cv;
    const auto gate = select_and_gate({kept}, options.gate_threshold, options.tie_window);
    out.report.gate_passed = gate.gate_passed;
    chosen = kept;
  } else {
    const Algo algos[] = {Algo::random_forest, Algo::gradient_boost};
    SearchOptions so;
    so.n_iter = options.n_iter;
    so.k_folds = options.k_folds;
    so.tie_window = options.tie_window;
    so.exec = options.exec;
    out.cells = randomized_search(cleaned, algos, so, stream.child("tuning"));

    std::vector<Candidate> winners;
    for (const auto& cell : out.cells) {
      if (cell.best) winners.push_back(cell.evaluated[*cell.best]);
    }
    const auto gate = select_and_gate(winners, options.gate_threshold, options.tie_window);
    out.report.gate_passed = gate.gate_passed;
    if (gate.selected) chosen = winners[*gate.selected];
  }

  if (!chosen) {
    out.report.n_train = cleaned.size();
    out.report.note = "no configuration produced a cross-validated R2";
    return out;
  }
  fill_report(out.report, *chosen);
  if (!out.report.gate_passed) {
    out.report.note = "excluded: cross-validated R2 below gate threshold";
    return out;
  }

  const auto applied = apply_outliers(cleaned, chosen->outlier);
  out.model = fit_model(applied.rows.x, applied.rows.y, chosen->hyper, stream.child("final"), options.exec);
  out.model->outlier = chosen->outlier;

  const double cap = stats::quantile(cleaned.y, 0.995);
  const auto raw = out.model->predict(prediction_rows.x, options.exec);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(raw[i], 0.0, cap);
    const bool clamped = v != raw[i];
    out.predictions.push_back({prediction_rows.ids[i], v, clamped});
    if (clamped) ++out.report.n_clamped;
  }
  out.report.n_predicted = out.predictions.size();
  return out;
}

}  // namespace floodline::ml
