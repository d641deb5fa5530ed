#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rieszstop/error.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/riesz.hpp"
#include "rieszstop/verify.hpp"

namespace rieszstop::config {

using json = nlohmann::json;

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw config_error("config " + path + ": " + e.what());
  }
}

/// Typed read of `obj[key]`; a missing key takes `fallback`, which is written
/// back so the resolved config records every value actually used.
template <class T>
T take(json& obj, const char* key, const T& fallback) {
  if (!obj.contains(key)) {
    obj[key] = fallback;
    return fallback;
  }
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw config_error(std::string("config: field '") + key + "' has the wrong type");
  }
}

template <class T>
T need(const json& obj, const char* key) {
  if (!obj.contains(key)) throw config_error(std::string("config: missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(std::string("config: field '") + key + "' has the wrong type");
  }
}

inline const json& child(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw config_error(std::string("config: missing field '") + key + "'");
  return obj.at(key);
}

inline json& section(json& root, const char* name) {
  if (!root.contains(name)) root[name] = json::object();
  if (!root[name].is_object()) throw config_error(std::string("config: '") + name + "' must be an object");
  return root[name];
}

/// Model keys d, mu[], a[], corr[][] (identity if absent), r, K.
inline GbmParams params_from(json& root) {
  GbmParams p;
  const int d = need<int>(root, "d");
  p.mu = need<std::vector<double>>(root, "mu");
  p.a = need<std::vector<double>>(root, "a");
  p.r = need<double>(root, "r");
  p.K = need<double>(root, "K");
  if (d < 1 || static_cast<int>(p.mu.size()) != d || static_cast<int>(p.a.size()) != d)
    throw config_error("config: mu and a must have length d");
  p.corr = Eigen::MatrixXd::Identity(d, d);
  if (root.contains("corr")) {
    const auto rows = need<std::vector<std::vector<double>>>(root, "corr");
    if (static_cast<int>(rows.size()) != d) throw config_error("config: corr must be d x d");
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(rows[i].size()) != d) throw config_error("config: corr must be d x d");
      for (int j = 0; j < d; ++j) p.corr(i, j) = rows[i][j];
    }
  } else {
    std::vector<std::vector<double>> id(d, std::vector<double>(d, 0.0));
    for (int i = 0; i < d; ++i) id[i][i] = 1.0;
    root["corr"] = id;
  }
  try {
    p.validate();
  } catch (const domain_error& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return p;
}

/// {"kind": "threshold", "threshold": x} | {"kind": "ellipse", "ellipse":
/// {"p1", "p2", "q", "kappa"}} | {"kind": "curve", "curve": {"t": [], "b": []}}.
inline CandidateSet candidate_from(const json& j) {
  const auto kind = need<std::string>(j, "kind");
  if (kind == "threshold") return CandidateSet::make_threshold(need<double>(j, "threshold"));
  if (kind == "ellipse") {
    const json& e = child(j, "ellipse");
    const double q = e.contains("q") ? need<double>(e, "q") : 2.0;
    const double kappa = e.contains("kappa") ? need<double>(e, "kappa") : 0.0;
    return CandidateSet::make_ellipsoid(need<double>(e, "p1"), need<double>(e, "p2"), q, kappa);
  }
  if (kind == "curve") {
    const json& c = child(j, "curve");
    TimeCurve tc{need<std::vector<double>>(c, "t"), need<std::vector<double>>(c, "b")};
    return CandidateSet::make_curve(std::move(tc));
  }
  throw config_error("config: unknown candidate kind '" + kind + "'");
}

inline json candidate_to(const CandidateSet& s) {
  json j;
  j["kind"] = s.kind_name();
  switch (s.kind) {
    case CandidateSet::Kind::Threshold: j["threshold"] = s.threshold; break;
    case CandidateSet::Kind::Ellipsoid:
      j["ellipse"] = {{"p1", s.ellipse.p1}, {"p2", s.ellipse.p2}, {"q", s.ellipse.q}, {"kappa", s.ellipse.kappa}};
      break;
    case CandidateSet::Kind::Curve: j["curve"] = {{"t", s.curve.t}, {"b", s.curve.b}}; break;
  }
  return j;
}

inline verify::Box box_from(const json& j) {
  verify::Box b{need<std::vector<double>>(j, "lo"), need<std::vector<double>>(j, "hi")};
  if (b.lo.size() != b.hi.size()) throw config_error("config: box lo and hi differ in length");
  return b;
}

}  // namespace rieszstop::config
