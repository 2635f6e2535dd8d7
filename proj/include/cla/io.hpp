#pragma once

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cla/connective.hpp"
#include "cla/continuity.hpp"
#include "cla/density.hpp"
#include "cla/error.hpp"
#include "cla/formula.hpp"
#include "cla/harness.hpp"
#include "cla/inference.hpp"
#include "cla/parser.hpp"
#include "cla/pattern.hpp"
#include "cla/signature.hpp"
#include "cla/tabulated.hpp"

namespace cla::io {

using json = nlohmann::json;

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": malformed JSON: " + e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

template <class T>
T get(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(what + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(what + ": bad \"" + key + "\": " + e.what());
  }
}

// Non-finite numbers become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

// ---- signature ----

inline Signature signature_from_json(const json& j) {
  if (!j.is_object() || !j.contains("relations") || !j["relations"].is_array())
    throw ValidationError("signature: expected {\"relations\": [...]}");
  Signature sig;
  for (const auto& r : j["relations"]) {
    const auto name = get<std::string>(r, "name", "signature");
    const auto arity = get<long long>(r, "arity", "signature");
    if (arity < 1) throw ValidationError("signature: relation " + name + " must have arity >= 1");
    if (sig.find(name)) throw ValidationError("signature: relation " + name + " declared twice");
    sig.add({name, static_cast<std::size_t>(arity)});
  }
  sig.validate();
  return sig;
}

inline json to_json(const Signature& sig) {
  json rels = json::array();
  for (const auto& r : sig.relations()) rels.push_back({{"name", r.name}, {"arity", r.arity}});
  return {{"relations", rels}};
}

// ---- patterns ----

inline IdentityPattern pattern_from_json(const json& j, std::size_t size) {
  if (!j.is_array()) throw ValidationError("pattern: expected a list of blocks such as [[1,3],[2]]");
  std::vector<std::vector<std::size_t>> blocks;
  for (const auto& b : j) {
    if (!b.is_array()) throw ValidationError("pattern: each block must be a list of positions");
    std::vector<std::size_t> block;
    for (const auto& p : b) {
      if (!p.is_number_integer() || p.get<long long>() < 1) throw ValidationError("pattern: positions are integers >= 1");
      block.push_back(p.get<std::size_t>());
    }
    blocks.push_back(std::move(block));
  }
  return IdentityPattern::from_blocks(size, blocks);
}

inline IdentityPattern pattern_from_text(const std::string& text, std::size_t size) {
  return pattern_from_json(parse_json(text, "pattern"), size);
}

inline json to_json(const IdentityPattern& p) { return p.blocks(); }

// ---- densities ----

inline Density density_from_json(const json& j) {
  const auto type = get<std::string>(j, "type", "density");
  if (type == "uniform") return Density::uniform();
  if (type == "poly" || type == "polynomial") return Density::polynomial(get<std::vector<double>>(j, "coeffs", "density"));
  if (type == "piecewise")
    return Density::piecewise(get<std::vector<double>>(j, "breakpoints", "density"),
                              get<std::vector<std::vector<double>>>(j, "pieces", "density"));
  throw ValidationError("density: unknown type '" + type + "'");
}

inline json to_json(const Density& d) {
  switch (d.kind()) {
    case DensityKind::Uniform: return {{"type", "uniform"}};
    case DensityKind::Polynomial: return {{"type", "poly"}, {"coeffs", d.pieces()[0]}};
    case DensityKind::Piecewise: return {{"type", "piecewise"}, {"breakpoints", d.breakpoints()}, {"pieces", d.pieces()}};
  }
  return {};
}

inline DensityModel model_from_json(const json& j, const Signature& sig) {
  DensityModel m(sig);
  if (j.is_null()) return m;
  if (!j.is_object()) throw ValidationError("density model: expected an object");
  if (!j.contains("densities")) return m;
  for (const auto& e : j["densities"]) {
    const auto rel = get<std::string>(e, "relation", "density model");
    if (!sig.find(rel)) throw ValidationError("density model: relation " + rel + " is not in the signature");
    const std::size_t arity = sig.arity(rel);
    const IdentityPattern p =
        e.contains("pattern") ? pattern_from_json(e["pattern"], arity) : IdentityPattern::distinct(arity);
    if (!e.contains("density")) throw ValidationError("density model: entry for " + rel + " lacks \"density\"");
    m.set(rel, p, density_from_json(e["density"]));
  }
  return m;
}

inline json to_json(const DensityModel& m) {
  json arr = json::array();
  for (const auto& [key, d] : m.entries())
    arr.push_back({{"relation", key.first}, {"pattern", to_json(key.second)}, {"density", to_json(d)}});
  return {{"densities", arr}};
}

// ---- tabulated functions and connectives ----

inline json to_json(const TabulatedFunction& t) {
  return {{"arity", t.arity()}, {"grids", t.grids()}, {"values", t.values()}};
}

inline TabulatedFunction tabulated_from_json(const json& j) {
  const auto arity = get<std::size_t>(j, "arity", "tabulated function");
  auto grids = get<std::vector<std::vector<double>>>(j, "grids", "tabulated function");
  if (grids.size() != arity) throw ValidationError("tabulated function: arity does not match the number of grids");
  return TabulatedFunction(std::move(grids), get<std::vector<double>>(j, "values", "tabulated function"));
}

inline json to_json(const Expr& e) {
  switch (e.op) {
    case ExprOp::Const: return {{"op", "const"}, {"value", e.value}};
    case ExprOp::Arg: return {{"op", "arg"}, {"index", e.index}};
    default: break;
  }
  json args = json::array();
  for (const auto& k : e.kids) args.push_back(to_json(*k));
  json out = {{"op", op_name(e.op)}, {"args", args}};
  if (e.op == ExprOp::Table) out["table"] = to_json(*e.table);
  return out;
}

inline ExprPtr expr_from_json(const json& j) {
  const auto op = get<std::string>(j, "op", "expression");
  if (op == "const") return Expr::constant(get<double>(j, "value", "expression"));
  if (op == "arg") return Expr::arg(get<std::size_t>(j, "index", "expression"));
  std::vector<ExprPtr> kids;
  if (j.contains("args"))
    for (const auto& a : j["args"]) kids.push_back(expr_from_json(a));
  if (op == "table") return Expr::apply_table(std::make_shared<const TabulatedFunction>(tabulated_from_json(j["table"])), kids);
  static const std::pair<const char*, ExprOp> ops[] = {
      {"sum", ExprOp::Sum}, {"diff", ExprOp::Diff}, {"prod", ExprOp::Prod},   {"min", ExprOp::Min},
      {"max", ExprOp::Max}, {"abs", ExprOp::Abs},   {"complement", ExprOp::Complement},
      {"avg", ExprOp::Avg}, {"clamp", ExprOp::Clamp}};
  for (const auto& [name, code] : ops)
    if (op == name) return Expr::node(code, std::move(kids));
  throw ValidationError("expression: unknown op '" + op + "'");
}

inline json to_json(const Connective& c) {
  return {{"name", c.name()}, {"arity", c.arity()}, {"expr", to_json(*c.root())}};
}

inline Connective connective_from_json(const json& j) {
  return Connective(get<std::size_t>(j, "arity", "connective"), expr_from_json(j.at("expr")),
                    j.value("name", std::string("custom")));
}

// ---- formulas ----

inline json to_json(const Formula& f) {
  if (f.is_const()) return {{"const", f.as_const().value}};
  if (f.is_eq()) return {{"eq", {f.as_eq().lhs, f.as_eq().rhs}}};
  if (f.is_atom()) return {{"atom", f.as_atom().relation}, {"args", f.as_atom().args}};
  if (f.is_conn()) {
    json args = json::array();
    for (const auto& a : f.as_conn().args) args.push_back(to_json(a));
    return {{"conn", to_json(f.as_conn().connective)}, {"args", args}};
  }
  return {{"agg", f.as_agg().aggregator.name()}, {"bound", f.as_agg().bound}, {"body", to_json(f.as_agg().body)}};
}

inline Formula formula_from_json(const json& j) {
  if (j.contains("const")) return Formula::constant(j["const"].get<double>());
  if (j.contains("eq")) return Formula::eq(j["eq"][0].get<std::string>(), j["eq"][1].get<std::string>());
  if (j.contains("atom")) return Formula::atom(j["atom"].get<std::string>(), get<std::vector<std::string>>(j, "args", "formula"));
  if (j.contains("conn")) {
    std::vector<Formula> args;
    for (const auto& a : j["args"]) args.push_back(formula_from_json(a));
    return Formula::conn(connective_from_json(j["conn"]), std::move(args));
  }
  if (j.contains("agg"))
    return Formula::agg(aggregator(j["agg"].get<std::string>()), get<std::string>(j, "bound", "formula"),
                        formula_from_json(j.at("body")));
  throw ValidationError("formula: unrecognized JSON node");
}

// ---- inference results ----

inline json to_json(const ProbabilityEstimate& e) {
  return {{"alpha", e.value}, {"half_width", number(e.error)}, {"method", method_name(e.method)}, {"budget", e.budget}};
}

inline json to_json(const EliminationStep& s) {
  json j = {{"aggregator", s.aggregator},
            {"bound", s.bound},
            {"t", s.t},
            {"s", s.s},
            {"grid", s.grid},
            {"budget", s.budget},
            {"statistic", s.statistic},
            {"method", method_name(s.method)},
            {"tolerance", number(s.tolerance)},
            {"stabilization", number(s.stabilization)},
            {"trusted", s.trusted},
            {"y_free_atoms", s.y_free_atoms},
            {"y_atoms", s.y_atoms}};
  if (s.table) j["table"] = to_json(*s.table);
  else j["constant"] = s.constant;
  return j;
}

inline json to_json(const EliminationResult& r, const std::vector<Variable>& vars, const IdentityPattern& p) {
  json trace = json::array();
  for (const auto& s : r.trace) trace.push_back(to_json(s));
  return {{"vars", vars},
          {"pattern", to_json(p)},
          {"output_text", to_string(r.output)},
          {"output", to_json(r.output)},
          {"tolerance", number(r.tolerance())},
          {"trace", trace}};
}

inline json to_json(const Interval& i) { return {i.lo, i.hi}; }

inline std::string csv_number(double v) { return std::isfinite(v) ? format_number(v) : std::string(); }

inline json to_json(const ConvergenceReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"n", row.n},
              {"samples", row.samples},
              {"tuples", row.tuples},
              {"tuples_total", row.tuples_total},
              {"subsampled", row.subsampled},
              {"closeness_freq", row.closeness_freq},
              {"membership_freq", row.membership_freq},
              {"alpha_hat", row.alpha_hat},
              {"alpha_err", number(row.alpha_err)}};
    if (r.timings) j["wall_ms"] = row.wall_ms;
    rows.push_back(j);
  }
  return {{"formula", r.formula},
          {"eliminated", r.eliminated},
          {"vars", r.vars},
          {"pattern", r.pattern},
          {"interval", to_json(r.interval)},
          {"epsilon", r.epsilon},
          {"seed", r.seed},
          {"alpha", r.limit.estimate.value},
          {"alpha_err", number(r.limit.estimate.error)},
          {"integration_error", r.limit.integration_error},
          {"elimination_error", number(r.limit.elimination_error)},
          {"method", method_name(r.limit.estimate.method)},
          {"closeness_nondecreasing", r.closeness_nondecreasing},
          {"rows", rows}};
}

inline std::string to_csv(const ConvergenceReport& r) {
  std::string s = "n,samples,closeness_freq,membership_freq,alpha_hat,alpha_err,wall_ms\n";
  for (const auto& row : r.rows) {
    s += std::to_string(row.n) + "," + std::to_string(row.samples) + "," + csv_number(row.closeness_freq) + "," +
         csv_number(row.membership_freq) + "," + csv_number(row.alpha_hat) + "," + csv_number(row.alpha_err) + "," +
         (r.timings ? csv_number(row.wall_ms) : std::string()) + "\n";
  }
  return s;
}

inline json to_json(const ConcentrationReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"n", row.n},
              {"structures", row.structures},
              {"tuples", row.tuples},
              {"subsampled", row.subsampled},
              {"pass_fraction", row.pass_fraction},
              {"worst_deviation", row.worst_deviation}};
    if (r.timings) j["wall_ms"] = row.wall_ms;
    rows.push_back(j);
  }
  return {{"formula", r.formula}, {"vars", r.vars},         {"pattern", r.pattern},
          {"bins", r.bins},       {"delta", r.delta},       {"seed", r.seed},
          {"profile", r.profile.alpha}, {"profile_error", r.profile.error}, {"rows", rows}};
}

inline std::string to_csv(const ConcentrationReport& r) {
  std::string s = "n,structures,pass_fraction,worst_deviation,wall_ms\n";
  for (const auto& row : r.rows)
    s += std::to_string(row.n) + "," + std::to_string(row.structures) + "," + csv_number(row.pass_fraction) + "," +
         csv_number(row.worst_deviation) + "," + (r.timings ? csv_number(row.wall_ms) : std::string()) + "\n";
  return s;
}

inline json to_json(const ContinuityReport& r, bool include_sequences = false) {
  json j = {{"verdict", r.falsified ? "falsified" : "no-counterexample-found"},
            {"epsilon", r.params.epsilon},
            {"delta", r.params.delta},
            {"bins", r.params.bins},
            {"min_length", r.params.min_length},
            {"trials", r.params.trials},
            {"seed", r.params.seed},
            {"trials_run", r.trials_run},
            {"rejected_candidates", r.rejected_candidates}};
  if (r.witness) {
    const auto& w = *r.witness;
    json wj = {{"condition", w.condition},
               {"gap", w.gap},
               {"first_length", w.first.size()},
               {"second_length", w.second.size()},
               {"profile", w.profile},
               {"first_counts", w.first_counts},
               {"second_counts", w.second_counts}};
    if (include_sequences) {
      wj["first"] = w.first;
      wj["second"] = w.second;
    }
    j["witness"] = wj;
  }
  return j;
}

// ---- experiment configs ----

struct LoadedInputs {
  Signature signature;
  DensityModel model;
};

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

// Reads a config object, which may give signature and model inline or as
// file paths relative to `base`. The pattern covers all declared variables
// except the last `trailing` ones (1 for concentration experiments, whose
// last variable is the aggregated one).
inline Experiment experiment_from_json(const json& j, const std::filesystem::path& base = {}, std::size_t trailing = 0) {
  if (!j.is_object()) throw ValidationError("config: expected an object");
  Experiment e;
  std::optional<Signature> sig;
  if (j.contains("signature")) {
    const auto& s = j["signature"];
    sig = signature_from_json(s.is_string() ? read_json_file(resolve_path(base, s.get<std::string>())) : s);
  }
  std::optional<std::vector<Variable>> declared;
  if (j.contains("vars")) declared = get<std::vector<std::string>>(j, "vars", "config");
  const auto text = get<std::string>(j, "formula", "config");
  ParsedFormula parsed = sig ? parse_formula(text, *sig, declared) : parse_formula(text, nullptr, declared);
  e.formula = parsed.formula;
  e.vars = parsed.vars;
  json model = nullptr;
  if (j.contains("model")) {
    const auto& m = j["model"];
    model = m.is_string() ? read_json_file(resolve_path(base, m.get<std::string>())) : m;
  }
  e.model = model_from_json(model, parsed.signature);
  if (e.vars.size() < trailing) throw ValidationError("config: formula needs an aggregated variable");
  const std::size_t k = e.vars.size() - trailing;
  e.pattern = j.contains("pattern") ? pattern_from_json(j["pattern"], k) : IdentityPattern::distinct(k);
  if (j.contains("interval")) {
    const auto iv = get<std::vector<double>>(j, "interval", "config");
    if (iv.size() != 2 || !(iv[0] >= 0.0 && iv[0] <= iv[1] && iv[1] <= 1.0))
      throw ValidationError("config: interval must be [lo, hi] with 0 <= lo <= hi <= 1");
    e.interval = Interval::closed(iv[0], iv[1]);
  }
  if (j.contains("ladder")) e.ladder = get<std::vector<std::size_t>>(j, "ladder", "config");
  e.structures = j.value("structures", e.structures);
  e.epsilon = j.value("epsilon", e.epsilon);
  e.seed = j.value("seed", e.seed);
  e.tuple_cap = j.value("tuple_cap", e.tuple_cap);
  e.bins = j.value("bins", e.bins);
  e.delta = j.value("delta", e.delta);
  if (j.contains("elimination")) {
    const auto& c = j["elimination"];
    e.elimination.grid = c.value("grid", e.elimination.grid);
    e.elimination.budget = c.value("budget", e.elimination.budget);
    e.elimination.resolution = c.value("resolution", e.elimination.resolution);
    e.elimination.scan_resolution = c.value("scan_resolution", e.elimination.scan_resolution);
    if (c.contains("method")) e.elimination.method = parse_method(c["method"].get<std::string>());
    if (c.contains("seed")) e.elimination.seed = c["seed"].get<std::uint64_t>();
    else e.elimination.seed = e.seed;
  } else {
    e.elimination.seed = e.seed;
  }
  if (j.contains("integration")) {
    const auto& c = j["integration"];
    e.integration.samples = c.value("samples", e.integration.samples);
    e.integration.resolution = c.value("resolution", e.integration.resolution);
    if (c.contains("method")) e.integration.method = parse_method(c["method"].get<std::string>());
    if (c.contains("seed")) e.integration.seed = c["seed"].get<std::uint64_t>();
    else e.integration.seed = e.seed;
  } else {
    e.integration.seed = e.seed;
  }
  return e;
}

inline Experiment load_experiment(const std::filesystem::path& path, std::size_t trailing = 0) {
  return experiment_from_json(read_json_file(path), path.parent_path(), trailing);
}

}  // namespace cla::io
