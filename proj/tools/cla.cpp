// Command-line front end for the cla library.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cla.hpp"

namespace {

using cla::io::json;

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;
};

struct FormulaInputs {
  std::string formula;
  std::string signature;
  std::string model;
  std::vector<std::string> vars;
};

struct Loaded {
  cla::ParsedFormula parsed;
  cla::DensityModel model;
};

void add_formula_options(CLI::App* cmd, FormulaInputs& in, bool required = true) {
  auto* f = cmd->add_option("--formula,-f", in.formula, "formula in the CLA syntax");
  if (required) f->required();
  cmd->add_option("--signature,-s", in.signature, "signature JSON file (inferred from the formula when absent)");
  cmd->add_option("--model,-m", in.model, "density model JSON file (uniform when absent)");
  cmd->add_option("--vars", in.vars, "declared free-variable tuple (default: free variables in order)");
}

Loaded load(const FormulaInputs& in) {
  std::optional<cla::Signature> sig;
  if (!in.signature.empty()) sig = cla::io::signature_from_json(cla::io::read_json_file(in.signature));
  std::optional<std::vector<cla::Variable>> declared;
  if (!in.vars.empty()) declared = in.vars;
  Loaded l{sig ? cla::parse_formula(in.formula, *sig, declared) : cla::parse_formula(in.formula, nullptr, declared), {}};
  const json model = in.model.empty() ? json(nullptr) : cla::io::read_json_file(in.model);
  l.model = cla::io::model_from_json(model, l.parsed.signature);
  return l;
}

cla::IdentityPattern pattern_arg(const std::string& text, std::size_t size) {
  if (text.empty()) return cla::IdentityPattern::distinct(size);
  return cla::io::pattern_from_text(text, size);
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) std::cout << text;
  else cla::io::write_text_file(g.out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous logic with aggregation functions: evaluation, inference and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--out,-o", g.out, "output file (stdout when absent)");

  // check
  FormulaInputs check_in;
  auto* check = app.add_subcommand("check", "parse a formula and report its structure");
  add_formula_options(check, check_in);

  // sample
  std::string sample_sig, sample_model;
  std::size_t sample_n = 0, sample_index = 0;
  auto* sample = app.add_subcommand("sample", "sample one structure and write it as JSON");
  sample->add_option("--signature,-s", sample_sig, "signature JSON file")->required();
  sample->add_option("--model,-m", sample_model, "density model JSON file");
  sample->add_option("--n", sample_n, "domain size")->required()->check(CLI::PositiveNumber);
  sample->add_option("--index", sample_index, "structure index");

  // eval
  FormulaInputs eval_in;
  std::size_t eval_n = 0, eval_samples = 1;
  std::vector<std::size_t> eval_assign;
  auto* eval = app.add_subcommand("eval", "evaluate a formula on sampled structures");
  add_formula_options(eval, eval_in);
  eval->add_option("--n", eval_n, "domain size")->required()->check(CLI::PositiveNumber);
  eval->add_option("--assign", eval_assign, "elements assigned to the declared variables");
  eval->add_option("--samples", eval_samples, "number of structures")->check(CLI::PositiveNumber);

  // prob
  FormulaInputs prob_in;
  std::string prob_pattern, prob_method = "auto";
  std::vector<double> prob_interval{0.0, 1.0};
  std::size_t prob_budget = 0;
  auto* prob = app.add_subcommand("prob", "probability that an aggregation-free formula lies in an interval");
  add_formula_options(prob, prob_in);
  prob->add_option("--pattern,-p", prob_pattern, "identity pattern as JSON blocks, e.g. [[1],[2]]");
  prob->add_option("--interval", prob_interval, "interval lo hi")->expected(2);
  prob->add_option("--method", prob_method, "auto, quadrature or mc");
  prob->add_option("--budget", prob_budget, "Monte Carlo samples or quadrature cells per axis");

  // eliminate
  FormulaInputs elim_in;
  std::string elim_pattern, elim_method = "auto";
  std::size_t elim_grid = 17, elim_budget = 20000, elim_resolution = 256, elim_scan = 512;
  bool elim_generic = false;
  auto* elim = app.add_subcommand("eliminate", "replace every aggregation by an aggregation-free formula");
  add_formula_options(elim, elim_in);
  elim->add_option("--pattern,-p", elim_pattern, "identity pattern as JSON blocks");
  elim->add_option("--grid", elim_grid, "tabulation nodes per axis");
  elim->add_option("--budget", elim_budget, "Monte Carlo samples per node");
  elim->add_option("--method", elim_method, "auto, quadrature or mc");
  elim->add_option("--resolution", elim_resolution, "quadrature cells per axis");
  elim->add_option("--scan-resolution", elim_scan, "support lattice size for essential sup/inf");
  elim->add_flag("--generic", elim_generic, "allow the untrusted sampling path for other aggregators");

  // converge / concentrate
  std::string conv_config, conv_csv;
  bool conv_timings = false;
  auto* converge = app.add_subcommand("converge", "convergence-law experiment over an n ladder");
  converge->add_option("--config,-c", conv_config, "experiment config JSON")->required();
  converge->add_option("--csv", conv_csv, "also write the per-n table as CSV");
  converge->add_flag("--timings", conv_timings, "record wall-clock times (breaks byte-identical output)");

  std::string conc_config, conc_csv;
  bool conc_timings = false;
  auto* concentrate = app.add_subcommand("concentrate", "histogram concentration experiment");
  concentrate->add_option("--config,-c", conc_config, "experiment config JSON; last variable is aggregated")->required();
  concentrate->add_option("--csv", conc_csv, "also write the per-n table as CSV");
  concentrate->add_flag("--timings", conc_timings, "record wall-clock times");

  // aggcheck
  std::string agg_name = "am";
  cla::ContinuityParams agg_params;
  bool agg_sequences = false;
  auto* aggcheck = app.add_subcommand("aggcheck", "search for violations of aggregation continuity");
  aggcheck->add_option("--aggregator,-a", agg_name, "min, max, am or threshold");
  aggcheck->add_option("--epsilon", agg_params.epsilon);
  aggcheck->add_option("--delta", agg_params.delta);
  aggcheck->add_option("--bins", agg_params.bins)->check(CLI::PositiveNumber);
  aggcheck->add_option("--min-length", agg_params.min_length)->check(CLI::PositiveNumber);
  aggcheck->add_option("--trials", agg_params.trials)->check(CLI::PositiveNumber);
  aggcheck->add_flag("--sequences", agg_sequences, "include the witness sequences in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*check) {
      const Loaded l = load(check_in);
      cla::validate(l.parsed.formula, l.parsed.signature);
      const json j = {{"formula", cla::to_string(l.parsed.formula)},
                      {"vars", l.parsed.vars},
                      {"aggregations", cla::aggregation_count(l.parsed.formula)},
                      {"aggregation_free", cla::aggregation_free(l.parsed.formula)},
                      {"signature", cla::io::to_json(l.parsed.signature)},
                      {"tree", cla::io::to_json(l.parsed.formula)}};
      emit(g, j.dump(2) + "\n");
    } else if (*sample) {
      const cla::Signature sig = cla::io::signature_from_json(cla::io::read_json_file(sample_sig));
      const json model = sample_model.empty() ? json(nullptr) : cla::io::read_json_file(sample_model);
      const cla::DensityModel m = cla::io::model_from_json(model, sig);
      const cla::ContinuousStructure a = cla::sample_structure(sample_n, m, g.seed, sample_index, g.threads);
      json rels = json::object();
      for (std::size_t r = 0; r < sig.size(); ++r) {
        const auto v = a.values(r);
        rels[sig.relations()[r].name] = std::vector<double>(v.begin(), v.end());
      }
      emit(g, json{{"n", sample_n}, {"seed", g.seed}, {"index", sample_index}, {"relations", rels}}.dump() + "\n");
    } else if (*eval) {
      const Loaded l = load(eval_in);
      if (eval_assign.size() != l.parsed.vars.size())
        throw cla::ValidationError("eval: --assign needs " + std::to_string(l.parsed.vars.size()) + " elements");
      const cla::Evaluator ev(l.parsed.formula, l.parsed.vars, l.parsed.signature);
      std::vector<double> values(eval_samples);
      cla::parallel_for(eval_samples, g.threads, [&](std::size_t i) {
        values[i] = ev(cla::sample_structure(eval_n, l.model, g.seed, i), eval_assign);
      });
      std::string csv = "sample_index,value\n";
      for (std::size_t i = 0; i < eval_samples; ++i) csv += std::to_string(i) + "," + cla::format_number(values[i]) + "\n";
      emit(g, csv);
    } else if (*prob) {
      const Loaded l = load(prob_in);
      if (!cla::aggregation_free(l.parsed.formula))
        throw cla::ValidationError("prob: formula must be aggregation-free (use eliminate first)");
      if (!(prob_interval[0] >= 0.0 && prob_interval[0] <= prob_interval[1] && prob_interval[1] <= 1.0))
        throw cla::ValidationError("prob: interval must satisfy 0 <= lo <= hi <= 1");
      cla::IntegrationConfig cfg;
      cfg.method = cla::parse_method(prob_method);
      cfg.seed = g.seed;
      cfg.threads = g.threads;
      if (prob_budget) {
        cfg.samples = prob_budget;
        cfg.resolution = prob_budget;
      }
      const auto p = pattern_arg(prob_pattern, l.parsed.vars.size());
      const auto est = cla::prob_in_interval(l.parsed.formula, p, l.parsed.vars,
                                             cla::Interval::closed(prob_interval[0], prob_interval[1]), l.model, cfg);
      emit(g, cla::io::to_json(est).dump() + "\n");
    } else if (*elim) {
      const Loaded l = load(elim_in);
      cla::EliminationConfig cfg;
      cfg.grid = elim_grid;
      cfg.budget = elim_budget;
      cfg.method = cla::parse_method(elim_method);
      cfg.resolution = elim_resolution;
      cfg.scan_resolution = elim_scan;
      cfg.seed = g.seed;
      cfg.threads = g.threads;
      cfg.allow_generic = elim_generic;
      const auto p = pattern_arg(elim_pattern, l.parsed.vars.size());
      const auto r = cla::eliminate(l.parsed.formula, p, l.parsed.vars, l.model, cfg);
      emit(g, cla::io::to_json(r, l.parsed.vars, p).dump(2) + "\n");
    } else if (*converge) {
      cla::Experiment e = cla::io::load_experiment(conv_config);
      e.threads = g.threads;
      e.timings = conv_timings;
      if (app.get_option("--seed")->count()) e.seed = e.elimination.seed = e.integration.seed = g.seed;
      const auto rep = cla::run_convergence(e);
      emit(g, cla::io::to_json(rep).dump(2) + "\n");
      if (!conv_csv.empty()) cla::io::write_text_file(conv_csv, cla::io::to_csv(rep));
    } else if (*concentrate) {
      cla::Experiment e = cla::io::load_experiment(conc_config, 1);
      e.threads = g.threads;
      e.timings = conc_timings;
      if (app.get_option("--seed")->count()) e.seed = e.elimination.seed = e.integration.seed = g.seed;
      const auto rep = cla::run_concentration(e);
      emit(g, cla::io::to_json(rep).dump(2) + "\n");
      if (!conc_csv.empty()) cla::io::write_text_file(conc_csv, cla::io::to_csv(rep));
    } else if (*aggcheck) {
      const cla::Aggregator a = cla::aggregator(agg_name);
      agg_params.seed = g.seed;
      if (!(agg_params.epsilon > 0.0 && agg_params.delta > 0.0))
        throw cla::ValidationError("aggcheck: epsilon and delta must be positive");
      const auto rep = cla::falsify_continuity(a, agg_params);
      emit(g, cla::io::to_json(rep, agg_sequences).dump(2) + "\n");
    }
  } catch (const cla::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cla::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
