#include "bestscore/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"

#include "bestscore/dirichlet.hpp"
#include "bestscore/divisiveness.hpp"
#include "bestscore/error.hpp"
#include "bestscore/latent_trait.hpp"
#include "bestscore/losses.hpp"

namespace bestscore::cli {

namespace {

using json = nlohmann::ordered_json;

const std::vector<std::pair<std::string, Subcommand>> kSubcommands = {
    {"fit-prior", Subcommand::fit_prior}, {"best", Subcommand::best},
    {"evaluate", Subcommand::evaluate},   {"calibrate", Subcommand::calibrate},
    {"simulate", Subcommand::simulate},   {"permtest", Subcommand::permtest},
    {"latent", Subcommand::latent},
};

// JSON has no infinities; they are written as strings.
json number(double x) {
  if (std::isinf(x)) return x > 0 ? "Infinity" : "-Infinity";
  if (std::isnan(x)) return "NaN";
  return x;
}

json numbers(std::span<const double> xs) {
  json arr = json::array();
  for (double x : xs) arr.push_back(number(x));
  return arr;
}

std::string shortest(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  return f;
}

void emit(const Options& o, const json& report, std::ostream& out) {
  const std::string text = report.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    auto f = open_output(o.out);
    f << text;
  }
}

Format format_of(const Options& o, const std::string& path) {
  return o.format ? *o.format : format_for_path(path);
}

std::vector<std::string> class_names(const Options& o, std::optional<std::size_t> k) {
  if (o.classes.empty()) return {};
  auto names = load_class_names(o.classes);
  if (k && names.size() != *k)
    throw DataError(o.classes + ": " + std::to_string(names.size()) + " class names for " +
                    std::to_string(*k) + " classes");
  return names;
}

void attach_classes(json& report, const std::vector<std::string>& names) {
  if (!names.empty()) report["classes"] = names;
}

AnnotationMatrix load_annotation_input(const Options& o, const std::string& path,
                                       std::ostream& err) {
  auto load = load_annotations(path, format_of(o, path), o.drop_empty);
  if (load.dropped_empty > 0)
    err << "dropped " << load.dropped_empty << " rows with no annotations from " << path << '\n';
  auto names = class_names(o, load.matrix.num_classes());
  if (!names.empty()) return load.matrix.with_class_names(std::move(names));
  return std::move(load.matrix);
}

json prior_json(const DirichletPrior& prior) {
  return numbers(prior.alpha());
}

json estimate_json(const BestEstimate& e) {
  json j;
  j["metric"] = metric_name(e.metric.kind);
  j["score"] = number(e.score);
  j["std_error"] = number(e.std_error);
  j["rounds"] = e.rounds;
  j["seed"] = e.seed;
  j["alpha"] = prior_json(e.prior);
  if (e.metric.kind == MetricKind::xentropy_soft) j["reduction"] = "mean_per_example";
  return j;
}

// Prediction rows reordered to the annotations' id order, in their original
// representation (logits stay logits).
Matrix<double> aligned_values(const AnnotationMatrix& annotations, const PredictionSet& preds) {
  (void)align(annotations, preds);  // reports missing ids and class mismatches
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < preds.size(); ++i) index.emplace(preds.ids()[i], i);
  Matrix<double> out(annotations.size(), preds.num_classes());
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    auto src = preds.values().row(index.at(annotations.ids()[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void run_fit_prior(const Command& cmd, std::ostream& out, std::ostream& err) {
  const Options& o = cmd.options;
  const AnnotationMatrix annotations = load_annotation_input(o, o.annotations, err);
  const FitReport fit = fit_prior(annotations);
  json report;
  report["alpha"] = prior_json(fit.prior);
  report["final_nll"] = number(fit.final_nll);
  report["iterations"] = fit.iterations;
  report["converged"] = fit.converged;
  report["gradient_norm"] = number(fit.gradient_norm);
  report["n"] = annotations.size();
  report["warnings"] = fit.warnings;
  attach_classes(report, annotations.class_names());
  emit(o, report, out);
  err << "fit-prior: " << annotations.size() << " examples, K=" << annotations.num_classes()
      << ", " << (fit.converged ? "converged" : "did not converge") << " after "
      << fit.iterations << " iterations, NLL " << fit.final_nll << '\n';
  for (const auto& w : fit.warnings) err << "warning: " << w << '\n';
}

void run_best(const Command& cmd, std::ostream& out, std::ostream& err) {
  const Options& o = cmd.options;
  const AnnotationMatrix annotations = load_annotation_input(o, o.annotations, err);
  std::vector<MetricConfig> configs;
  for (MetricKind k : o.metrics) configs.emplace_back(k, annotations.num_classes());
  BestOptions options;
  options.rounds = o.rounds;
  options.seed = cmd.seed;
  options.threads = o.threads;
  const auto estimates = best_scores(annotations, configs, options);

  json report;
  if (estimates.size() == 1) {
    report = estimate_json(estimates.front());
  } else {
    report["metrics"] = json::array();
    for (const auto& e : estimates) report["metrics"].push_back(estimate_json(e));
  }
  attach_classes(report, annotations.class_names());
  emit(o, report, out);
  for (const auto& e : estimates)
    err << "best " << metric_name(e.metric.kind) << ": " << e.score << " +/- " << e.std_error
        << " (" << e.rounds << " rounds)\n";
  if (const auto& fit = estimates.front().fit)
    for (const auto& w : fit->warnings) err << "warning: " << w << '\n';
}

void run_evaluate(const Command& cmd, std::ostream& out, std::ostream& err) {
  const Options& o = cmd.options;
  const AnnotationMatrix annotations = load_annotation_input(o, o.annotations, err);
  const PredictionSet preds =
      load_predictions(o.predictions, format_of(o, o.predictions), o.kind);
  const AlignedEval eval = align(annotations, preds);

  std::vector<json> results;
  for (MetricKind k : o.metrics) {
    const MetricValue v = evaluate(eval, k);
    json j;
    j["metric"] = metric_name(k);
    j["value"] = number(v.value);
    j["n"] = annotations.size();
    if (k == MetricKind::xentropy_soft) j["reduction"] = "mean_per_example";
    results.push_back(std::move(j));
    err << metric_name(k) << ": " << v.value << " over " << annotations.size() << " examples\n";
  }
  json report;
  if (results.size() == 1) {
    report = results.front();
  } else {
    report["metrics"] = results;
  }
  attach_classes(report, annotations.class_names());
  emit(o, report, out);
}

void run_calibrate(const Command& cmd, std::ostream& out, std::ostream& err) {
  const Options& o = cmd.options;
  const AnnotationMatrix annotations = load_annotation_input(o, o.annotations, err);
  const PredictionSet preds =
      load_predictions(o.predictions, format_of(o, o.predictions), o.kind);
  Matrix<double> values = aligned_values(annotations, preds);
  const LogitBatch z = preds.kind() == PredictionKind::logits
                           ? LogitBatch(std::move(values))
                           : LogitBatch::from_probabilities(values);
  const TemperatureScaler scaler = fit_temperature(z, annotations);
  const double before = tempered_soft_cross_entropy(z, annotations, 1.0);
  const double after = tempered_soft_cross_entropy(z, annotations, scaler.temperature());
  json report;
  report["T"] = number(scaler.temperature());
  report["xentropy_before"] = number(before);
  report["xentropy_after"] = number(after);
  report["n"] = annotations.size();
  attach_classes(report, annotations.class_names());
  emit(o, report, out);
  err << "calibrate: T = " << scaler.temperature() << ", cross-entropy " << before << " -> "
      << after << '\n';
}

json annotator_law_json(const AnnotatorLaw& law) {
  return std::visit(
      [](const auto& l) -> json {
        using L = std::decay_t<decltype(l)>;
        json j;
        if constexpr (std::is_same_v<L, FixedAnnotators>) {
          j["law"] = "fixed";
          j["count"] = l.count;
        } else if constexpr (std::is_same_v<L, EmpiricalAnnotators>) {
          j["law"] = "empirical";
          j["reference_rows"] = l.totals.size();
        } else {
          j["law"] = "lognormal";
          j["median"] = l.median;
          j["sigma"] = l.sigma;
        }
        return j;
      },
      law);
}

void run_simulate(const Command& cmd, std::ostream& out, std::ostream& err) {
  const Options& o = cmd.options;
  ScenarioConfig config;
  switch (*o.scenario) {
    case ScenarioKind::fitted_prior: {
      std::optional<AnnotationMatrix> reference;
      if (!o.reference.empty()) reference = load_annotation_input(o, o.reference, err);
      config = anecdotes_scenario(cmd.seed, reference);
      break;
    }
    case ScenarioKind::fixed_annotators:
      config = annotators_scenario(cmd.seed, o.annotators.value_or(3));
      break;
    case ScenarioKind::mixture_prior:
      config = mixture_scenario(cmd.seed);
      break;
  }
  if (o.examples) config.n_examples = *o.examples;
  config.rounds = o.rounds;
  config.threads = o.threads;
  const auto names = class_names(o, config.num_classes);
  const ScenarioReport result = run_scenario(config);

  json report;
  report["scenario"] = scenario_name(config.kind);
  report["seed"] = config.seed;
  report["num_classes"] = config.num_classes;
  report["n_examples"] = config.n_examples;
  report["rounds"] = config.rounds;
  report["annotators"] = annotator_law_json(config.annotators);
  report["true_prior"] = json::array();
  for (const auto& c : config.true_prior)
    report["true_prior"].push_back({{"alpha", prior_json(c.prior)}, {"weight", c.weight}});
  report["fitted_prior"] = prior_json(result.fitted_prior);
  report["metrics"] = json::array();
  for (const auto& m : result.metrics) {
    json j;
    j["metric"] = metric_name(m.metric);
    j["true_oracle"] = number(m.true_oracle);
    j["best_estimate"] = number(m.estimate.score);
    j["std_error"] = number(m.estimate.std_error);
    j["relative_error"] = number(m.relative_error);
    if (m.absolute) j["absolute_error"] = true;
    report["metrics"].push_back(std::move(j));
  }
  attach_classes(report, names);
  emit(o, report, out);
  err << "simulate " << scenario_name(config.kind) << " (" << config.n_examples
      << " examples, " << config.rounds << " rounds)\n";
  for (const auto& m : result.metrics)
    err << "  " << metric_name(m.metric) << ": oracle " << m.true_oracle << ", estimate "
        << m.estimate.score << ", " << (m.absolute ? "absolute" : "relative") << " error "
        << m.relative_error << '\n';
}

void run_permtest(const Command& cmd, std::ostream& out, std::ostream& err) {
  const Options& o = cmd.options;
  std::ifstream in(o.items);
  if (!in) throw DataError("cannot open '" + o.items + "'");
  const BinaryLabeledItems items = read_items(in);
  const auto names = class_names(o, std::nullopt);
  PermTestOptions options;
  options.n_samples = o.samples;
  options.seed = cmd.seed;
  options.alpha = o.alpha;
  options.conservative = o.conservative;
  const auto results = permutation_tests(items, options);

  json report;
  report["alpha"] = o.alpha;
  report["samples"] = o.samples;
  report["seed"] = cmd.seed;
  report["conservative"] = o.conservative;
  report["items"] = items.items().size();
  report["class_totals"] = {{"less", items.class_totals().less},
                            {"more", items.class_totals().more}};
  std::size_t rejected = 0;
  report["features"] = json::array();
  for (const auto& r : results) {
    json j;
    j["feature"] = r.feature;
    j["p"] = number(r.p_raw);
    j["p_adjusted"] = number(r.p_adjusted);
    j["lr"] = number(r.lr);
    j["better"] = r.better;
    j["worse"] = r.worse;
    j["total"] = r.total;
    j["rejected"] = r.rejected;
    rejected += r.rejected;
    report["features"].push_back(std::move(j));
  }
  attach_classes(report, names);
  emit(o, report, out);
  err << "permtest: " << results.size() << " features, " << rejected
      << " significant after Holm-Bonferroni at alpha " << o.alpha << '\n';
}

void run_latent(const Command& cmd, std::ostream& out, std::ostream& err) {
  const Options& o = cmd.options;
  std::ifstream in(o.responses);
  if (!in) throw DataError("cannot open '" + o.responses + "'");
  const ResponseTable table = read_responses(in);
  const auto names = class_names(o, std::nullopt);
  LatentFitOptions options;
  options.quadrature_nodes = o.nodes;
  options.seed = cmd.seed;
  const LatentFit fit = fit_latent(table, o.traits, options);
  const DevianceReport dev = deviance_from_loglik(fit.loglik, table);

  std::vector<std::string> questions = table.question_names();
  if (questions.empty())
    for (std::size_t q = 0; q < table.questions(); ++q) questions.push_back("q" + std::to_string(q));

  json report;
  report["traits"] = o.traits;
  report["annotators"] = table.annotators();
  report["questions"] = table.questions();
  report["dropped_rows"] = table.dropped_rows();
  report["iterations"] = fit.iterations;
  report["converged"] = fit.converged;
  report["loglik_model"] = number(dev.loglik_model);
  report["loglik_saturated"] = number(dev.loglik_saturated);
  report["loglik_null"] = number(dev.loglik_null);
  report["deviance"] = number(dev.deviance);
  report["null_deviance"] = number(dev.null_deviance);
  report["percent_explained"] = number(dev.percent_explained);
  report["percent_residual"] = number(dev.percent_residual);
  json loadings = json::array();
  for (std::size_t q = 0; q < table.questions(); ++q) {
    json row;
    row["question"] = questions[q];
    row["loadings"] = numbers(fit.model.loadings.row(q));
    row["intercept"] = number(fit.model.intercepts[q]);
    loadings.push_back(std::move(row));
  }
  report["loadings"] = std::move(loadings);
  attach_classes(report, names);

  if (!o.loadings_out.empty()) {
    auto f = open_output(o.loadings_out);
    f << "question";
    for (std::size_t t = 0; t < o.traits; ++t) f << ",trait" << t + 1;
    f << ",intercept\n";
    for (std::size_t q = 0; q < table.questions(); ++q) {
      f << questions[q];
      for (double w : fit.model.loadings.row(q)) f << ',' << shortest(w);
      f << ',' << shortest(fit.model.intercepts[q]) << '\n';
    }
  }
  if (!o.scores_out.empty()) {
    const Matrix<double> scores =
        project_annotators(fit.model, table, latent_rule(o.traits, options));
    auto f = open_output(o.scores_out);
    f << "annotator";
    for (std::size_t t = 0; t < o.traits; ++t) f << ",trait" << t + 1;
    f << '\n';
    for (std::size_t a = 0; a < scores.rows(); ++a) {
      f << a;
      for (double z : scores.row(a)) f << ',' << shortest(z);
      f << '\n';
    }
  }
  emit(o, report, out);
  err << "latent: " << o.traits << " traits, " << table.annotators() << " annotators ("
      << table.dropped_rows() << " incomplete dropped), " << dev.percent_explained
      << "% of null deviance explained\n";
}

}  // namespace

std::string subcommand_name(Subcommand s) {
  for (const auto& [name, value] : kSubcommands)
    if (value == s) return name;
  return "?";
}

Command parse(const std::vector<std::string>& args) {
  if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
    bool known = false;
    for (const auto& [name, value] : kSubcommands) known = known || name == args.front();
    if (!known) throw UsageError("unknown subcommand '" + args.front() + "'");
  }

  Command cmd;
  Options& o = cmd.options;
  CLI::App app{"Oracle-score estimation and annotation statistics", "bestscore"};
  app.require_subcommand(1);

  std::string format, kind, scenario;
  std::vector<std::string> metric_names;
  std::size_t examples = 0;
  int annotators = 0;

  std::unordered_map<CLI::App*, Subcommand> which;
  auto add = [&](Subcommand s, const std::string& description) {
    CLI::App* sub = app.add_subcommand(subcommand_name(s), description);
    which[sub] = s;
    sub->add_option("--seed", cmd.seed, "Random seed (default 0)");
    sub->add_option("--classes", o.classes, "JSON file of class names");
    sub->add_option("--out", o.out, "Write the JSON report here instead of standard output");
    return sub;
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", format, "Input format: jsonl or csv (default: by extension)");
  };
  auto add_annotations = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--annotations", o.annotations, "Annotation counts file");
    if (required) opt->required();
    sub->add_flag("--drop-empty", o.drop_empty, "Skip rows with no annotations");
    add_format(sub);
  };
  auto add_rounds = [&](CLI::App* sub) {
    sub->add_option("--rounds", o.rounds, "Monte Carlo rounds")
        ->check(CLI::Range(std::size_t{1}, kMaxRounds));
    sub->add_option("--threads", o.threads, "Worker threads (0: all cores)");
  };

  CLI::App* fit = add(Subcommand::fit_prior, "Fit a Dirichlet prior to annotation counts");
  add_annotations(fit, true);

  CLI::App* best = add(Subcommand::best, "Estimate the oracle classifier's score");
  add_annotations(best, true);
  best->add_option("--metric", metric_names, "Metric(s): xentropy, accuracy, f1, tv")
      ->delimiter(',');
  add_rounds(best);

  CLI::App* eval = add(Subcommand::evaluate, "Score predictions against annotations");
  add_annotations(eval, true);
  eval->add_option("--predictions", o.predictions, "Predictions file")->required();
  eval->add_option("--kind", kind, "Prediction values: probs or logits (default: from file)");
  eval->add_option("--metric", metric_names, "Metric(s): xentropy, accuracy, f1, tv")
      ->delimiter(',');

  CLI::App* cal = add(Subcommand::calibrate, "Fit a softmax temperature to predictions");
  add_annotations(cal, true);
  cal->add_option("--predictions", o.predictions, "Predictions file")->required();
  cal->add_option("--kind", kind, "Prediction values: probs or logits (default: from file)");

  CLI::App* sim = add(Subcommand::simulate, "Validate the estimator on synthetic data");
  sim->add_option("--scenario", scenario, "anecdotes, annotators or mixture")->required();
  sim->add_option("--reference", o.reference, "Annotation file to fit the anecdotes scenario to");
  sim->add_flag("--drop-empty", o.drop_empty, "Skip reference rows with no annotations");
  add_format(sim);
  CLI::Option* examples_opt =
      sim->add_option("--examples", examples, "Number of examples")->check(CLI::Range(2, 100'000'000));
  CLI::Option* annotators_opt = sim->add_option("--annotators", annotators,
                                                "Annotations per example (annotators scenario)")
                                    ->check(CLI::Range(1, 1'000'000));
  add_rounds(sim);

  CLI::App* perm = add(Subcommand::permtest, "Permutation tests of feature-class association");
  perm->add_option("--items", o.items, "JSONL of labeled items")->required();
  perm->add_option("--alpha", o.alpha, "Family-wise significance level")
      ->check(CLI::Range(0.0, 1.0));
  perm->add_option("--samples", o.samples, "Permutations per feature")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1'000'000'000}));
  perm->add_flag("--conservative", o.conservative, "Use (k + 1) / (n + 1) p values");

  CLI::App* lat = add(Subcommand::latent, "Latent trait analysis of binary responses");
  lat->add_option("--responses", o.responses, "CSV of 0/1 responses, one row per annotator")
      ->required();
  lat->add_option("--traits", o.traits, "Number of latent traits")->required();
  lat->add_option("--nodes", o.nodes, "Quadrature nodes per dimension")
      ->check(CLI::Range(std::size_t{5}, std::size_t{200}));
  lat->add_option("--loadings-out", o.loadings_out, "CSV of question loadings");
  lat->add_option("--scores-out", o.scores_out, "CSV of projected annotator scores");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream help;
    app.exit(e, help, help);
    throw HelpRequested(help.str());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  CLI::App* chosen = app.get_subcommands().front();
  cmd.subcommand = which.at(chosen);

  if (!format.empty()) o.format = parse_format(format);
  if (!kind.empty()) {
    if (kind == "probs" || kind == "probabilities") {
      o.kind = PredictionKind::probabilities;
    } else if (kind == "logits") {
      o.kind = PredictionKind::logits;
    } else {
      throw UsageError("--kind: expected probs or logits, got '" + kind + "'");
    }
  }
  for (const auto& m : metric_names) o.metrics.push_back(parse_metric(m));
  if (o.metrics.empty()) o.metrics.push_back(MetricKind::xentropy_soft);
  if (!scenario.empty()) o.scenario = parse_scenario(scenario);
  if (examples_opt->count() > 0) o.examples = examples;
  if (annotators_opt->count() > 0) {
    if (o.scenario != ScenarioKind::fixed_annotators)
      throw UsageError("--annotators only applies to --scenario annotators");
    o.annotators = annotators;
  }
  if (!o.reference.empty() && o.scenario != ScenarioKind::fitted_prior)
    throw UsageError("--reference only applies to --scenario anecdotes");
  if (cmd.subcommand == Subcommand::permtest && !(o.alpha > 0.0 && o.alpha < 1.0))
    throw UsageError("--alpha must lie strictly between 0 and 1");
  if (!o.scores_out.empty() && o.traits == 0)
    throw UsageError("--scores-out needs --traits of at least 1");
  return cmd;
}

void execute(const Command& command, std::ostream& out, std::ostream& err) {
  switch (command.subcommand) {
    case Subcommand::fit_prior: return run_fit_prior(command, out, err);
    case Subcommand::best: return run_best(command, out, err);
    case Subcommand::evaluate: return run_evaluate(command, out, err);
    case Subcommand::calibrate: return run_calibrate(command, out, err);
    case Subcommand::simulate: return run_simulate(command, out, err);
    case Subcommand::permtest: return run_permtest(command, out, err);
    case Subcommand::latent: return run_latent(command, out, err);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto report_error = [&](const std::exception& e) {
    err << json{{"error", e.what()}}.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  };
  Command command;
  try {
    command = parse(args);
  } catch (const HelpRequested& h) {
    out << h.what();
    return 0;
  } catch (const std::exception& e) {
    report_error(e);
    return 2;
  }
  try {
    execute(command, out, err);
  } catch (const UsageError& e) {
    report_error(e);
    return 2;
  } catch (const std::exception& e) {
    report_error(e);
    return 1;
  }
  return 0;
}

}  // namespace bestscore::cli
