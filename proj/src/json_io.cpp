#include "lcvar/json_io.hpp"

#include <fstream>

namespace lcvar {

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorKind::parse, "matrix must be a non-empty array of rows");
  }
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) {
      throw Error(ErrorKind::parse, "ragged matrix rows");
    }
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

Json to_json(const VarParams& p) {
  return Json{{"B", matrix_to_json(p.b())},
              {"C", matrix_to_json(p.c())},
              {"D", matrix_to_json(p.d())},
              {"E", matrix_to_json(p.e())},
              {"sigma", matrix_to_json(p.sigma)}};
}

VarParams var_params_from_json(const Json& j) {
  for (const char* key : {"B", "C", "D", "E", "sigma"}) {
    if (!j.contains(key)) {
      throw Error(ErrorKind::parse, std::string("missing block '") + key + "'");
    }
  }
  const Eigen::MatrixXd b = matrix_from_json(j["B"]);
  const int k_z = static_cast<int>(j["E"].size());
  Eigen::MatrixXd c(b.rows(), k_z), d(k_z, b.cols()), e(k_z, k_z);
  if (k_z > 0) {
    c = matrix_from_json(j["C"]);
    d = matrix_from_json(j["D"]);
    e = matrix_from_json(j["E"]);
  }
  return VarParams::from_blocks(b, c, d, e, matrix_from_json(j["sigma"]));
}

namespace {

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  Eigen::VectorXd v(j.size());
  for (int i = 0; i < static_cast<int>(j.size()); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

Json to_json(const GmmNoiseModel& m) {
  Json channels = Json::array();
  for (const auto& ch : m.channels) {
    channels.push_back(Json{{"weights", vector_to_json(ch.weights)},
                            {"means", vector_to_json(ch.means)},
                            {"variances", vector_to_json(ch.variances)}});
  }
  return Json{{"noise", std::move(channels)}};
}

GmmNoiseModel noise_from_json(const Json& j) {
  if (!j.contains("noise")) {
    throw Error(ErrorKind::parse, "missing 'noise'");
  }
  GmmNoiseModel m;
  for (const auto& ch : j["noise"]) {
    m.channels.push_back(GmmChannel{vector_from_json(ch.at("weights")),
                                    vector_from_json(ch.at("means")),
                                    vector_from_json(ch.at("variances"))});
  }
  m.validate();
  return m;
}

Json system_to_json(const VarParams& p, const GmmNoiseModel& noise) {
  Json j = to_json(p);
  j["noise"] = to_json(noise)["noise"];
  return j;
}

std::pair<VarParams, GmmNoiseModel> system_from_json(const Json& j) {
  return {var_params_from_json(j), noise_from_json(j)};
}

Json to_json(const SolventSet& s) {
  Json roots = Json::array();
  for (const auto& r : s.latent_roots) {
    roots.push_back(Json{{"re", r.real()}, {"im", r.imag()}});
  }
  Json cands = Json::array();
  for (const auto& c : s.candidates) cands.push_back(matrix_to_json(c));
  return Json{{"latent_roots", std::move(roots)},
              {"candidates", std::move(cands)},
              {"certification", s.certification},
              {"distinct_roots", s.distinct_roots},
              {"skipped_subsets", s.skipped_subsets}};
}

Json to_json(const ResidualAnsatz& a) {
  return Json{{"U1", matrix_to_json(a.u1)},
              {"U2", matrix_to_json(a.u2)},
              {"residual_norm", a.residual_norm},
              {"condition", a.condition},
              {"effective_rank", a.effective_rank},
              {"rank_deficient", a.rank_deficient}};
}

Json to_json(const EstimationReport& r) {
  Json j{{"method", r.method},
         {"seed", r.run_seed},
         {"wall_ms", r.wall_ms},
         {"diagnostics",
          Json{{"ansatz_residual", r.ansatz_residual},
               {"condition_number", r.condition_number},
               {"g2_distinct_roots", r.g2_distinct_roots},
               {"assumptions_unverified", r.assumptions_unverified},
               {"final_elbo", r.final_elbo},
               {"iterations", r.iterations},
               {"error_stage", r.error_stage},
               {"note", r.note}}}};
  if (r.estimate) j["estimate"] = matrix_to_json(*r.estimate);
  if (!r.candidates.empty()) {
    Json cands = Json::array();
    for (const auto& c : r.candidates) cands.push_back(matrix_to_json(c));
    j["candidates"] = std::move(cands);
  }
  if (r.c_estimate) j["C_estimate"] = matrix_to_json(*r.c_estimate);
  return j;
}

Json to_json(const ElboTrace& t) {
  return Json{{"values", t.values}, {"converged", t.converged}, {"iterations", t.iterations}};
}

Json to_json(const CheckReport& r) {
  Json ks = Json::array();
  for (const auto& k : r.ks) {
    ks.push_back(Json{{"statistic", k.statistic},
                      {"p_value", k.p_value},
                      {"bootstrap", k.bootstrap}});
  }
  return Json{{"ks_per_channel", std::move(ks)},
              {"independence",
               Json{{"statistic", r.independence.statistic},
                    {"dof", r.independence.dof},
                    {"p_value", r.independence.p_value}}},
              {"lag_budget", r.lag_budget},
              {"alpha", r.alpha},
              {"ansatz_found", r.ansatz_found},
              {"gaussianity_rejected_all", r.gaussianity_rejected_all},
              {"independence_rejected", r.independence_rejected},
              {"pass", r.pass},
              {"note", r.note}};
}

Json to_json(const VemParams& p) {
  Json j{{"B", matrix_to_json(p.b())},
         {"C", matrix_to_json(p.c())},
         {"D", matrix_to_json(p.d())},
         {"E", matrix_to_json(p.e())},
         {"k_x", p.k_x},
         {"k_z", p.k_z}};
  Json channels = Json::array();
  for (const auto& ch : p.noise) {
    channels.push_back(Json{{"weights", vector_to_json(ch.weights)},
                            {"means", vector_to_json(ch.means)},
                            {"variances", vector_to_json(ch.variances)}});
  }
  j["noise"] = std::move(channels);
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::parse, "cannot open '" + path + "'");
  }
  Json j;
  try {
    in >> j;
  } catch (const std::exception& err) {
    throw Error(ErrorKind::parse, std::string("invalid JSON: ") + err.what());
  }
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::validation, "cannot write '" + path + "'");
  }
  out << j.dump(2) << '\n';
}

}  // namespace lcvar
