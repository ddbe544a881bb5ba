#include "varhardy/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "varhardy/errors.hpp"

namespace varhardy {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw ValidationError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

double number_or_inf(const Json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw ValidationError("unexpected string \"" + v.get<std::string>() + "\" in numeric field");
  }
  if (!v.is_number()) throw ValidationError("expected a number");
  return v.get<double>();
}

Eigen::VectorXd numbers(const Json& arr) {
  if (!arr.is_array()) throw ValidationError("expected an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) out[static_cast<Eigen::Index>(i)] = number_or_inf(arr[i]);
  return out;
}

template <class F>
auto guarded(F&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed JSON value: ") + e.what());
  }
}

}  // namespace

Json space_to_json(const FilteredSpace& space) {
  Json levels = Json::array();
  for (const Partition& part : space.levels()) levels.push_back(part);
  return {{"leaf_probs", vector_to_json(space.probs())["values"]}, {"levels", std::move(levels)}};
}

FilteredSpace space_from_json(const Json& j) {
  return guarded([&] {
    Eigen::VectorXd probs = numbers(field(j, "leaf_probs"));
    std::vector<Partition> levels = field(j, "levels").get<std::vector<Partition>>();
    return FilteredSpace(std::move(probs), std::move(levels));
  });
}

Json exponent_to_json(const Exponent& p) {
  Json values = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (std::isinf(p[i]))
      values.push_back("inf");
    else
      values.push_back(p[i]);
  }
  return {{"values", std::move(values)}};
}

Exponent exponent_from_json(const Json& j) {
  return guarded([&] {
    Eigen::VectorXd values = numbers(field(j, "values"));
    const bool any_inf = values.array().isInf().any();
    return Exponent(std::move(values), any_inf);
  });
}

Json vector_to_json(const RandomVariable& f) {
  Json values = Json::array();
  for (Eigen::Index i = 0; i < f.size(); ++i) values.push_back(f[i]);
  return {{"values", std::move(values)}};
}

RandomVariable vector_from_json(const Json& j) {
  return guarded([&] { return numbers(j.is_array() ? j : field(j, "values")); });
}

Json martingale_to_json(const Martingale& f) {
  Json levels = Json::array();
  for (const RandomVariable& level : f.levels()) levels.push_back(vector_to_json(level)["values"]);
  return {{"levels", std::move(levels)}};
}

Martingale martingale_from_json(const Json& j, std::shared_ptr<const FilteredSpace> space) {
  return guarded([&] {
    if (j.is_object() && j.contains("terminal")) {
      const RandomVariable terminal = numbers(j.at("terminal"));
      if (terminal.size() != space->leaf_count())
        throw ValidationError("terminal length does not match the leaf count");
      return martingale_from_terminal(std::move(space), terminal);
    }
    const Json& levels = field(j, "levels");
    if (!levels.is_array()) throw ValidationError("\"levels\" must be an array");
    std::vector<RandomVariable> out;
    for (const Json& level : levels) out.push_back(numbers(level));
    return make_martingale(std::move(space), std::move(out));
  });
}

Json stopping_time_to_json(const StoppingTime& tau) {
  Json values = Json::array();
  for (int t : tau.levels()) {
    if (t == kNever)
      values.push_back("inf");
    else
      values.push_back(t);
  }
  return {{"stop_level", std::move(values)}};
}

StoppingTime stopping_time_from_json(const Json& j, const FilteredSpace& space) {
  return guarded([&] {
    const Json& arr = field(j, "stop_level");
    if (!arr.is_array()) throw ValidationError("\"stop_level\" must be an array");
    std::vector<int> levels;
    for (const Json& v : arr) {
      if (v.is_string() && v.get<std::string>() == "inf")
        levels.push_back(kNever);
      else if (v.is_number_integer())
        levels.push_back(v.get<int>());
      else
        throw ValidationError("stop levels must be integers or \"inf\"");
    }
    return validate_stopping_time(space, std::move(levels));
  });
}

Json decomposition_to_json(const AtomicDecomposition& dec) {
  Json terms = Json::array();
  for (const AtomicTerm& t : dec.terms) {
    terms.push_back({{"k", t.k},
                     {"mu", t.mu},
                     {"tau", stopping_time_to_json(t.tau)["stop_level"]},
                     {"atom_terminal", vector_to_json(t.atom_terminal)["values"]}});
  }
  return {{"k_min", dec.k_min}, {"k_max", dec.k_max}, {"terms", std::move(terms)}};
}

AtomicDecomposition decomposition_from_json(const Json& j) {
  return guarded([&] {
    AtomicDecomposition dec;
    dec.k_min = field(j, "k_min").get<int>();
    dec.k_max = field(j, "k_max").get<int>();
    for (const Json& t : field(j, "terms")) {
      std::vector<int> stop;
      for (const Json& v : field(t, "tau"))
        stop.push_back(v.is_string() ? kNever : v.get<int>());
      dec.terms.push_back({field(t, "k").get<int>(), field(t, "mu").get<double>(),
                           StoppingTime(std::move(stop)), numbers(field(t, "atom_terminal"))});
    }
    return dec;
  });
}

const char* mode_name(SupMode mode) {
  switch (mode) {
    case SupMode::Auto: return "auto";
    case SupMode::Exhaustive: return "exhaustive";
    case SupMode::Sampled: return "sampled";
  }
  return "auto";
}

Json sup_result_to_json(const SupNormResult& r) {
  return {{"value", r.value},
          {"argmax_tau", stopping_time_to_json(r.argmax_tau)},
          {"mode", mode_name(r.mode)},
          {"candidates", r.candidates}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string csv_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace varhardy
