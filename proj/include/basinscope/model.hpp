#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "expr.hpp"
#include "linalg.hpp"

namespace basinscope {

/// Per-call parameter values that replace model defaults.
using ParamMap = std::map<std::string, double>;

inline constexpr std::size_t kMaxModelDimension = 6;
inline constexpr std::size_t kMaxGridDimension = 3;

/// A named autonomous ODE system x' = f(x; p). Immutable after construction;
/// the symbolic Jacobian is built once up front.
class SystemModel {
 public:
  SystemModel(std::string name, std::vector<std::string> state,
              std::vector<std::pair<std::string, double>> params,
              const std::vector<std::string>& rhs_text)
      : name_(std::move(name)), state_(std::move(state)) {
    if (state_.empty()) throw SchemaError("model must declare at least one state variable");
    if (state_.size() > kMaxModelDimension)
      throw SchemaError("model dimension exceeds " + std::to_string(kMaxModelDimension));
    if (rhs_text.size() != state_.size())
      throw SchemaError("expected " + std::to_string(state_.size()) +
                        " right-hand sides, got " + std::to_string(rhs_text.size()));
    for (auto& [n, v] : params) {
      param_names_.push_back(n);
      defaults_.push_back(v);
    }
    for (std::size_t i = 0; i < state_.size(); ++i) {
      try {
        rhs_.push_back(parse(rhs_text[i], state_, param_names_));
      } catch (const UnknownIdentifier& e) {
        throw UnknownIdentifier(e.name(), "rhs of '" + state_[i] + "'");
      } catch (const SyntaxError& e) {
        throw SyntaxError(e.position(), e.token(), e.detail() + " (rhs of '" + state_[i] + "')");
      }
    }
    jac_.resize(state_.size());
    for (std::size_t i = 0; i < state_.size(); ++i)
      for (const auto& v : state_) jac_[i].push_back(differentiate(rhs_[i], v));
  }

  const std::string& name() const { return name_; }
  std::size_t dim() const { return state_.size(); }
  const std::vector<std::string>& state() const { return state_; }
  const std::vector<std::string>& param_names() const { return param_names_; }
  const std::vector<double>& param_defaults() const { return defaults_; }
  const std::vector<Expr>& rhs() const { return rhs_; }
  const Expr& jacobian_entry(std::size_t i, std::size_t j) const { return jac_[i][j]; }

  std::optional<std::size_t> param_index(const std::string& name) const {
    for (std::size_t i = 0; i < param_names_.size(); ++i)
      if (param_names_[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require_param(const std::string& name) const {
    auto idx = param_index(name);
    if (!idx) throw UnknownIdentifier(name, "parameters of model '" + name_ + "'");
    return *idx;
  }

  /// Defaults with `overrides` applied; overriding an undeclared name is an error.
  Vec param_values(const ParamMap& overrides = {}) const {
    Vec values = defaults_;
    for (const auto& [n, v] : overrides) values[require_param(n)] = v;
    return values;
  }

 private:
  std::string name_;
  std::vector<std::string> state_;
  std::vector<std::string> param_names_;
  std::vector<double> defaults_;
  std::vector<Expr> rhs_;
  std::vector<std::vector<Expr>> jac_;
};

/// A model bound to concrete parameter values, optionally with a constant
/// additive forcing term. This is what integrators and solvers consume.
/// Holds a reference: the model must outlive the field.
class VectorField {
 public:
  VectorField(const SystemModel& model, Vec params, Vec forcing = {})
      : model_(&model), params_(std::move(params)), forcing_(std::move(forcing)) {}
  VectorField(const SystemModel& model, const ParamMap& overrides)
      : VectorField(model, model.param_values(overrides)) {}
  VectorField(SystemModel&&, Vec, Vec = {}) = delete;
  VectorField(SystemModel&&, const ParamMap&) = delete;

  const SystemModel& model() const { return *model_; }
  std::size_t dim() const { return model_->dim(); }
  const Vec& params() const { return params_; }
  const Vec& forcing() const { return forcing_; }

  VectorField with_param(std::size_t index, double value) const {
    VectorField copy = *this;
    copy.params_[index] = value;
    return copy;
  }

  VectorField with_forcing(Vec forcing) const {
    VectorField copy = *this;
    copy.forcing_ = std::move(forcing);
    return copy;
  }

  void operator()(std::span<const double> x, std::span<double> out) const {
    const auto& rhs = model_->rhs();
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      out[i] = eval(rhs[i], x, params_);
      if (!forcing_.empty()) out[i] += forcing_[i];
    }
  }

  Vec operator()(std::span<const double> x) const {
    Vec out(dim());
    (*this)(x, out);
    return out;
  }

  /// Exact symbolic Jacobian; constant forcing does not contribute.
  Matrix jacobian(std::span<const double> x) const {
    const std::size_t n = dim();
    Matrix j(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) j(r, c) = eval(model_->jacobian_entry(r, c), x, params_);
    return j;
  }

 private:
  const SystemModel* model_;
  Vec params_;
  Vec forcing_;
};

/// Parses a model document: {"name", "state", "params", "rhs"}, nothing else.
inline SystemModel load_model(const std::string& document) {
  using nlohmann::ordered_json;
  ordered_json doc;
  try {
    doc = ordered_json::parse(document);
  } catch (const ordered_json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("model document must be a JSON object");
  static const std::set<std::string> required{"name", "state", "params", "rhs"};
  for (const auto& [key, _] : doc.items())
    if (!required.count(key)) throw SchemaError("unknown key '" + key + "'");
  for (const auto& key : required)
    if (!doc.contains(key)) throw SchemaError("missing key '" + key + "'");

  if (!doc["name"].is_string()) throw SchemaError("'name' must be a string");
  if (!doc["state"].is_array()) throw SchemaError("'state' must be an array of strings");
  if (!doc["params"].is_object()) throw SchemaError("'params' must be an object");
  if (!doc["rhs"].is_object()) throw SchemaError("'rhs' must be an object");

  std::vector<std::string> state;
  for (const auto& s : doc["state"]) {
    if (!s.is_string()) throw SchemaError("'state' must be an array of strings");
    state.push_back(s.get<std::string>());
  }
  std::vector<std::pair<std::string, double>> params;
  for (const auto& [k, v] : doc["params"].items()) {
    if (!v.is_number()) throw SchemaError("parameter '" + k + "' must be a number");
    params.emplace_back(k, v.get<double>());
  }
  const auto& rhs = doc["rhs"];
  if (rhs.size() != state.size())
    throw SchemaError("'rhs' has " + std::to_string(rhs.size()) + " entries for " +
                      std::to_string(state.size()) + " state variables");
  std::vector<std::string> rhs_text;
  for (const auto& s : state) {
    if (!rhs.contains(s)) throw SchemaError("no right-hand side for state variable '" + s + "'");
    if (!rhs[s].is_string()) throw SchemaError("right-hand side of '" + s + "' must be a string");
    rhs_text.push_back(rhs[s].get<std::string>());
  }
  return SystemModel(doc["name"].get<std::string>(), std::move(state), std::move(params),
                     rhs_text);
}

inline std::string print_model(const SystemModel& m) {
  nlohmann::ordered_json doc;
  doc["name"] = m.name();
  doc["state"] = m.state();
  doc["params"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < m.param_names().size(); ++i)
    doc["params"][m.param_names()[i]] = m.param_defaults()[i];
  doc["rhs"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < m.dim(); ++i) doc["rhs"][m.state()[i]] = print(m.rhs()[i]);
  return doc.dump(2);
}

/// Reference systems: the cubic saddle-node normal form, linear relaxation,
/// and a separable double-well gradient flow.
inline SystemModel builtin_model(const std::string& name) {
  if (name == "saddle_node_cubic")
    return SystemModel(name, {"x"}, {{"mu", 0.0}}, {"mu + x - x^3"});
  if (name == "linear_1d")
    return SystemModel(name, {"x"}, {{"mu", 0.0}, {"k", 1.0}}, {"mu - k*x"});
  if (name == "double_well_2d")
    return SystemModel(name, {"x", "y"}, {}, {"4*x - 4*x^3", "-2*y"});
  throw UnknownModel(name);
}

inline std::vector<std::string> builtin_model_names() {
  return {"saddle_node_cubic", "linear_1d", "double_well_2d"};
}

}  // namespace basinscope
