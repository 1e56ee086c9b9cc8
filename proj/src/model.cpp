#include "femimpute/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "femimpute/errors.hpp"

namespace femimpute {

namespace {

using nlohmann::json;

void validate_weights(const Eigen::VectorXd& w) {
  if (w.size() == 0) throw DimensionMismatch("model has no components");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (!(w(k) > 0.0) || !std::isfinite(w(k)))
      throw Error("component weight " + std::to_string(k) + " is not strictly positive");
    sum += w(k);
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw Error("component weights sum to " + std::to_string(sum) + ", expected 1");
}

void validate_shapes(int k, const std::vector<Eigen::VectorXd>& means,
                     const std::vector<Eigen::MatrixXd>& mats) {
  if (static_cast<int>(means.size()) != k || static_cast<int>(mats.size()) != k)
    throw DimensionMismatch("component count mismatch between weights, means, matrices");
  const Eigen::Index m = means.front().size();
  if (m == 0) throw DimensionMismatch("model dimension is zero");
  for (int i = 0; i < k; ++i) {
    if (means[static_cast<std::size_t>(i)].size() != m)
      throw DimensionMismatch("mean " + std::to_string(i) + " has wrong dimension");
    const auto& s = mats[static_cast<std::size_t>(i)];
    if (s.rows() != m || s.cols() != m)
      throw DimensionMismatch("matrix " + std::to_string(i) + " has wrong shape");
    if (!s.allFinite() || !means[static_cast<std::size_t>(i)].allFinite())
      throw Error("component " + std::to_string(i) + " holds non-finite parameters");
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + s.cwiseAbs().maxCoeff()))
      throw Error("matrix " + std::to_string(i) + " is not symmetric");
  }
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json flat = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return flat;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json model_json(const std::string& family, const std::string& matrix_key,
                const Eigen::VectorXd& weights, const std::vector<Eigen::VectorXd>& means,
                const std::vector<Eigen::MatrixXd>& mats) {
  json j;
  j["family"] = family;
  j["k"] = weights.size();
  j["m"] = means.front().size();
  j["weights"] = vector_to_json(weights);
  json jm = json::array();
  for (const auto& mu : means) jm.push_back(vector_to_json(mu));
  j["means"] = jm;
  json js = json::array();
  for (const auto& s : mats) js.push_back(matrix_to_json(s));
  j[matrix_key] = js;
  return j;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError(path + ": invalid JSON: " + e.what());
  }
  return j;
}

struct ParsedModel {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> mats;
};

ParsedModel parse_model(const json& j, const std::string& path,
                        const std::string& matrix_key) {
  try {
    ParsedModel out;
    const int k = j.at("k").get<int>();
    const int m = j.at("m").get<int>();
    if (k <= 0 || m <= 0) throw IoError(path + ": non-positive k or m");
    const auto& jw = j.at("weights");
    out.weights.resize(k);
    for (int i = 0; i < k; ++i) out.weights(i) = jw.at(i).get<double>();
    for (const auto& jm : j.at("means")) {
      Eigen::VectorXd mu(m);
      for (int f = 0; f < m; ++f) mu(f) = jm.at(f).get<double>();
      out.means.push_back(std::move(mu));
    }
    for (const auto& js : j.at(matrix_key)) {
      Eigen::MatrixXd s(m, m);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) s(r, c) = js.at(r * m + c).get<double>();
      out.mats.push_back(std::move(s));
    }
    return out;
  } catch (const json::exception& e) {
    throw IoError(path + ": malformed model file: " + e.what());
  }
}

}  // namespace

void MixtureModel::validate() const {
  validate_weights(weights);
  validate_shapes(k(), means, scatters);
  // The overall scale of a scatter is a nuisance: any positive trace is a
  // valid representative of the same model.  Fitted outputs are kept at
  // the canonical trace m, but inputs are only required to be scaled
  // sensibly enough to factor.
  for (int i = 0; i < k(); ++i) {
    const double tr = scatters[static_cast<std::size_t>(i)].trace();
    if (!(tr > 0.0))
      throw Error("scatter " + std::to_string(i) + " has non-positive trace " +
                  std::to_string(tr));
  }
}

void GaussianMixtureModel::validate() const {
  validate_weights(weights);
  validate_shapes(k(), means, covariances);
}

void Responsibilities::validate() const {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      if (p(i, k) < 0.0 || !std::isfinite(p(i, k)))
        throw Error("responsibility (" + std::to_string(i) + "," + std::to_string(k) +
                    ") is invalid");
      sum += p(i, k);
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error("responsibility row " + std::to_string(i) + " sums to " +
                  std::to_string(sum));
  }
}

std::vector<int> argmax_labels(const Eigen::MatrixXd& p) {
  std::vector<int> labels(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < p.cols(); ++k)
      if (p(i, k) > p(i, best)) best = static_cast<int>(k);
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

void save_model_json(const std::string& path, const MixtureModel& model) {
  model.validate();
  write_json(path, model_json("fem", "scatters", model.weights, model.means, model.scatters));
}

void save_model_json(const std::string& path, const GaussianMixtureModel& model) {
  model.validate();
  write_json(path, model_json("gmm", "covariances", model.weights, model.means,
                              model.covariances));
}

std::string model_file_family(const std::string& path) {
  const json j = read_json(path);
  if (!j.contains("family") || !j["family"].is_string())
    throw IoError(path + ": missing family tag");
  return j["family"].get<std::string>();
}

MixtureModel load_fem_model(const std::string& path) {
  const json j = read_json(path);
  if (model_file_family(path) != "fem")
    throw IoError(path + ": family is '" + j["family"].get<std::string>() +
                  "', expected 'fem'");
  ParsedModel parsed = parse_model(j, path, "scatters");
  MixtureModel model{std::move(parsed.weights), std::move(parsed.means),
                     std::move(parsed.mats)};
  model.validate();
  return model;
}

GaussianMixtureModel load_gmm_model(const std::string& path) {
  const json j = read_json(path);
  if (model_file_family(path) != "gmm")
    throw IoError(path + ": family is '" + j["family"].get<std::string>() +
                  "', expected 'gmm'");
  ParsedModel parsed = parse_model(j, path, "covariances");
  GaussianMixtureModel model{std::move(parsed.weights), std::move(parsed.means),
                             std::move(parsed.mats)};
  model.validate();
  return model;
}

}  // namespace femimpute
