#ifndef PIDSTEER_SERIALIZE_HPP
#define PIDSTEER_SERIALIZE_HPP

// JSON round-trip for plants, gains, steer functions and certificates.
// All reals keep full double precision (nlohmann emits shortest exact
// representations), so round-trips are deterministic.

#include <string>
#include <vector>

#include <json.hpp>

#include "pidsteer/analysis.hpp"
#include "pidsteer/controller.hpp"
#include "pidsteer/plant.hpp"

namespace pidsteer {

using json = nlohmann::json;

inline json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw InvalidInputError("matrix json must be a non-empty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw InvalidInputError("ragged matrix json");
    for (Eigen::Index jj = 0; jj < cols; ++jj)
      m(i, jj) = j[i][jj].get<double>();
  }
  return m;
}

inline json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Vec vec_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw InvalidInputError("vector json must be a non-empty array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

inline std::string layer_kind_name(LayerKind k) {
  return k == LayerKind::linear ? "linear" : "tanh-residual";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
  if (s == "linear") return LayerKind::linear;
  if (s == "tanh-residual") return LayerKind::tanh_residual;
  throw InvalidInputError("unknown layer kind: " + s);
}

inline json to_json(const LayerMap& lm) {
  return json{{"kind", layer_kind_name(lm.kind)},
              {"weight", mat_to_json(lm.weight)},
              {"bias", vec_to_json(lm.bias)},
              {"scale", lm.scale}};
}

inline LayerMap layer_map_from_json(const json& j) {
  LayerMap lm;
  lm.kind = layer_kind_from_name(j.at("kind").get<std::string>());
  lm.weight = mat_from_json(j.at("weight"));
  lm.bias = vec_from_json(j.at("bias"));
  lm.scale = j.value("scale", 1.0);
  return lm;
}

inline json to_json(const ContrastivePlant& p) {
  json layers = json::array();
  for (const auto& per_pair : p.layers) {
    json maps = json::array();
    for (const auto& lm : per_pair) maps.push_back(to_json(lm));
    layers.push_back(maps);
  }
  json ip = json::array(), im = json::array();
  for (const auto& x : p.initial_plus) ip.push_back(vec_to_json(x));
  for (const auto& x : p.initial_minus) im.push_back(vec_to_json(x));
  return json{{"dim", p.dim},
              {"pairs", p.pairs},
              {"layers", layers},
              {"initial_plus", ip},
              {"initial_minus", im}};
}

inline ContrastivePlant plant_from_json(const json& j) {
  ContrastivePlant p;
  p.dim = j.at("dim").get<Eigen::Index>();
  p.pairs = j.at("pairs").get<int>();
  for (const auto& per_pair : j.at("layers")) {
    std::vector<LayerMap> maps;
    for (const auto& lm : per_pair) maps.push_back(layer_map_from_json(lm));
    p.layers.push_back(std::move(maps));
  }
  for (const auto& x : j.at("initial_plus"))
    p.initial_plus.push_back(vec_from_json(x));
  for (const auto& x : j.at("initial_minus"))
    p.initial_minus.push_back(vec_from_json(x));
  p.validate();
  return p;
}

inline json to_json(const Gains& g) {
  return json{{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}};
}

inline Gains gains_from_json(const json& j) {
  return Gains(j.value("kp", 0.0), j.value("ki", 0.0), j.value("kd", 0.0));
}

inline json to_json(const SteerFn& s) {
  return json{{"kind", s.kind == SteerFn::Kind::add ? "add"
                                                    : "directional-ablation"},
              {"alpha", s.alpha}};
}

inline SteerFn steer_from_json(const json& j) {
  SteerFn s;
  const std::string kind = j.value("kind", "add");
  if (kind == "add")
    s.kind = SteerFn::Kind::add;
  else if (kind == "directional-ablation")
    s.kind = SteerFn::Kind::directional_ablation;
  else
    throw InvalidInputError("unknown steer kind: " + kind);
  s.alpha = j.value("alpha", 1.0);
  return s;
}

inline json to_json(const StabilityCertificate& c) {
  return json{{"m_bound", c.m_bound}, {"q", c.q},       {"h", c.h},
              {"ell", c.ell},         {"rho", c.rho},   {"c_const", c.c_const},
              {"iss", c.iss}};
}

inline json to_json(const LyapunovCertificate& c) {
  json j{{"mu", c.mu},
         {"r_weight", c.r_weight},
         {"epsilon", c.epsilon},
         {"s_margin", c.s_margin},
         {"t_margin", c.t_margin},
         {"admissible_ell_sq", c.admissible_ell_sq},
         {"valid", c.valid}};
  if (c.p_matrix.size() > 0) j["p_matrix"] = mat_to_json(c.p_matrix);
  if (c.q_matrix.size() > 0) j["q_matrix"] = mat_to_json(c.q_matrix);
  return j;
}

inline json to_json(const OvershootReport& r) {
  json events = json::array();
  for (const auto& ev : r.events)
    events.push_back(json{{"start", ev.start},
                          {"length", ev.length},
                          {"amplitude", ev.amplitude}});
  json j{{"events", events}};
  if (r.first)
    j["first"] = json{{"t0", r.first->t0},
                      {"t1", r.first->t1},
                      {"i_max", r.first->i_max},
                      {"a0", r.first->a0}};
  return j;
}

}  // namespace pidsteer

#endif  // PIDSTEER_SERIALIZE_HPP
