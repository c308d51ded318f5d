#include "bsid/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace bsid {

const std::array<std::string, kGlycolysisScalarCount>& glycolysis_scalar_names() {
  static const std::array<std::string, kGlycolysisScalarCount> names = {
      "J0", "k1", "k2", "k3", "k4", "k5", "k6", "k", "kappa", "q", "K_I", "phi", "N", "A"};
  return names;
}

ModelSpec ModelSpec::dictionary(int dimension, const FeatureLibrary& library) {
  if (library.dimension() != dimension)
    throw std::invalid_argument("model spec: library dimension mismatch");
  ModelSpec spec;
  spec.kind = Kind::dictionary;
  spec.dimension = dimension;
  spec.library = library;
  spec.mask.assign(static_cast<size_t>(dimension) * library.size(), 1);
  spec.fixed_coefficients = Eigen::MatrixXd::Zero(dimension, library.size());
  spec.sigma = Eigen::VectorXd::Ones(dimension);
  return spec;
}

ModelSpec ModelSpec::glycolysis_calibration(const Eigen::VectorXd& sigma) {
  if (sigma.size() != 7) throw std::invalid_argument("glycolysis spec: sigma must have 7 entries");
  if ((sigma.array() <= 0.0).any())
    throw std::invalid_argument("glycolysis spec: sigma must be strictly positive");
  ModelSpec spec;
  spec.kind = Kind::glycolysis;
  spec.dimension = 7;
  spec.scalar_mask.fill(1);
  spec.fixed_scalars.fill(0.0);
  spec.sigma = sigma;
  return spec;
}

int ModelSpec::dictionary_parameter_count() const {
  int n = 0;
  if (kind == Kind::dictionary) {
    for (std::uint8_t m : mask) n += m != 0;
  } else {
    for (std::uint8_t m : scalar_mask) n += m != 0;
  }
  return n;
}

int ModelSpec::parameter_count() const {
  return dictionary_parameter_count() + closure_parameter_count();
}

int ModelSpec::coefficient_index(int equation, int feature) const {
  if (kind != Kind::dictionary) throw std::logic_error("coefficient_index: dictionary specs only");
  if (!masked(equation, feature)) return -1;
  int index = 0;
  const int K = library.size();
  for (int flat = 0; flat < equation * K + feature; ++flat) {
    index += mask[static_cast<size_t>(flat)] != 0;
  }
  return index;
}

EvalWorkspace make_workspace(const ModelSpec& spec) {
  EvalWorkspace ws;
  if (spec.kind == ModelSpec::Kind::dictionary) {
    ws.phi.resize(spec.library.size());
    ws.phi_jac.resize(spec.library.size(), spec.dimension);
    ws.coeff.resize(spec.dimension, spec.library.size());
    ws.coeff_theta.assign(spec.mask.size(), -1);
    int p = 0;
    for (size_t flat = 0; flat < spec.mask.size(); ++flat) {
      if (spec.mask[flat]) ws.coeff_theta[flat] = p++;
    }
    if (spec.closure) {
      ws.mlp = spec.closure->make_workspace();
      ws.closure_w.resize(spec.closure->parameter_count());
    }
  } else {
    ws.x_phys.resize(spec.dimension);
    ws.cot_scaled.resize(spec.dimension);
    ws.scalar_theta.assign(kGlycolysisScalarCount, -1);
    int p = 0;
    for (int s = 0; s < kGlycolysisScalarCount; ++s) {
      if (spec.scalar_mask[static_cast<size_t>(s)]) ws.scalar_theta[static_cast<size_t>(s)] = p++;
    }
  }
  return ws;
}

void bind_parameters(const ModelSpec& spec, const Eigen::VectorXd& theta, EvalWorkspace& ws) {
  if (theta.size() != spec.parameter_count())
    throw std::invalid_argument("model: theta length does not match spec parameter count");
  if (spec.kind == ModelSpec::Kind::dictionary) {
    const int K = spec.library.size();
    ws.coeff = spec.fixed_coefficients;
    for (int i = 0; i < spec.dimension; ++i) {
      for (int k = 0; k < K; ++k) {
        const int p = ws.coeff_theta[static_cast<size_t>(i) * K + k];
        if (p >= 0) ws.coeff(i, k) = theta[p];
      }
    }
    if (spec.closure) {
      ws.closure_w = theta.tail(spec.closure->parameter_count());
    }
  } else {
    for (int s = 0; s < kGlycolysisScalarCount; ++s) {
      const int p = ws.scalar_theta[static_cast<size_t>(s)];
      ws.scalars[static_cast<size_t>(s)] =
          p >= 0 ? std::exp(theta[p]) : spec.fixed_scalars[static_cast<size_t>(s)];
    }
  }
  ws.bound = true;
}

namespace {

// Yeast glycolysis dynamics in physical coordinates. State order:
// (S1, S2, S3, S4, N2, A3, S4ex); N1 = N - N2 and A2 = A - A3 are eliminated.
// Scalar order matches glycolysis_scalar_names().
struct GlycolysisTerms {
  double u = 0.0;   // Hill inhibition factor 1 / (1 + (A3/K_I)^q)
  double w = 0.0;   // (A3/K_I)^q
  double v1 = 0.0;  // k1 S1 A3 u
  double n1 = 0.0;  // N - N2
  double a2 = 0.0;  // A - A3
  bool valid = false;
};

GlycolysisTerms glycolysis_terms(const std::array<double, kGlycolysisScalarCount>& p,
                                 const double* s) {
  GlycolysisTerms t;
  const double q = p[9], ki = p[10];
  const double a3 = s[5];
  if (!(a3 > 0.0) || !(ki > 0.0)) return t;  // Hill term leaves its domain
  t.w = std::exp(q * std::log(a3 / ki));
  t.u = 1.0 / (1.0 + t.w);
  t.v1 = p[1] * s[0] * a3 * t.u;
  t.n1 = p[12] - s[4];
  t.a2 = p[13] - a3;
  t.valid = std::isfinite(t.w);
  return t;
}

void glycolysis_rhs(const std::array<double, kGlycolysisScalarCount>& p, const double* s,
                    double* f) {
  const GlycolysisTerms t = glycolysis_terms(p, s);
  if (!t.valid) {
    for (int i = 0; i < 7; ++i) f[i] = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double r2 = p[2] * s[1] * t.n1;
  const double r3 = p[3] * s[2] * t.a2;
  const double r4 = p[4] * s[3] * s[4];
  const double r6 = p[6] * s[1] * s[4];
  const double rk = p[8] * (s[3] - s[6]);
  f[0] = p[0] - t.v1;
  f[1] = 2.0 * t.v1 - r2 - r6;
  f[2] = r2 - r3;
  f[3] = r3 - r4 - rk;
  f[4] = r2 - r4 - r6;
  f[5] = -2.0 * t.v1 + 2.0 * r3 - p[5] * s[5];
  f[6] = p[11] * rk - p[7] * s[6];
}

// cot^T df/dx into x_bar, cot^T df/dp accumulated into p_bar (nullable).
void glycolysis_vjp(const std::array<double, kGlycolysisScalarCount>& p, const double* s,
                    const double* cot, double* x_bar, double* p_bar) {
  const GlycolysisTerms t = glycolysis_terms(p, s);
  if (!t.valid) {
    for (int i = 0; i < 7; ++i) x_bar[i] = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double k1 = p[1], k2 = p[2], k3 = p[3], k4 = p[4], k5 = p[5], k6 = p[6];
  const double kap = p[8], q = p[9], ki = p[10], phi = p[11];
  const double s1 = s[0], s2 = s[1], s3 = s[2], s4 = s[3], n2 = s[4], a3 = s[5], s4x = s[6];

  // Cotangent of each reaction rate, from the row pattern it feeds:
  // v1 -> (-1, +2, 0, 0, 0, -2, 0), r2 -> (0, -1, +1, 0, +1, 0, 0),
  // r3 -> (0, 0, -1, +1, 0, +2, 0), r4 -> (0, 0, 0, -1, -1, 0, 0),
  // r6 -> (0, -1, 0, 0, -1, 0, 0),  rk -> (0, 0, 0, -1, 0, 0, +phi).
  const double cv1 = -cot[0] + 2.0 * cot[1] - 2.0 * cot[5];
  const double cr2 = -cot[1] + cot[2] + cot[4];
  const double cr3 = -cot[2] + cot[3] + 2.0 * cot[5];
  const double cr4 = -cot[3] - cot[4];
  const double cr6 = -cot[1] - cot[4];
  const double crk = -cot[3] + phi * cot[6];

  const double dv1_ds1 = k1 * a3 * t.u;
  const double dv1_da3 = k1 * s1 * t.u * (1.0 - q * t.w * t.u);

  x_bar[0] = cv1 * dv1_ds1;
  x_bar[1] = cr2 * k2 * t.n1 + cr6 * k6 * n2;
  x_bar[2] = cr3 * k3 * t.a2;
  x_bar[3] = cr4 * k4 * n2 + crk * kap;
  x_bar[4] = -cr2 * k2 * s2 + cr4 * k4 * s4 + cr6 * k6 * s2;
  x_bar[5] = cv1 * dv1_da3 - cr3 * k3 * s3 - k5 * cot[5];
  x_bar[6] = -crk * kap - p[7] * cot[6];

  if (p_bar != nullptr) {
    const double lnz = std::log(a3 / ki);
    p_bar[0] += cot[0];                                            // J0
    p_bar[1] += cv1 * s1 * a3 * t.u;                               // k1
    p_bar[2] += cr2 * s2 * t.n1;                                   // k2
    p_bar[3] += cr3 * s3 * t.a2;                                   // k3
    p_bar[4] += cr4 * s4 * n2;                                     // k4
    p_bar[5] += -cot[5] * a3;                                      // k5
    p_bar[6] += cr6 * s2 * n2;                                     // k6
    p_bar[7] += -cot[6] * s4x;                                     // k
    p_bar[8] += (-cot[3] + phi * cot[6]) * (s4 - s4x);             // kappa
    p_bar[9] += cv1 * k1 * s1 * a3 * (-t.u * t.u * t.w * lnz);     // q
    p_bar[10] += cv1 * k1 * s1 * a3 * (t.u * t.u * q * t.w / ki);  // K_I
    p_bar[11] += cot[6] * kap * (s4 - s4x);                        // phi
    p_bar[12] += cr2 * k2 * s2;                                    // N (through N1)
    p_bar[13] += cr3 * k3 * s3;                                    // A (through A2)
  }
}

}  // namespace

bool eval_rhs_bound(const ModelSpec& spec, const Eigen::VectorXd& x, double t,
                    Eigen::Ref<Eigen::VectorXd> out, EvalWorkspace& ws) {
  (void)t;  // built-in families are autonomous; t kept in the interface
  if (!ws.bound) throw std::logic_error("model: bind_parameters must run before evaluation");
  if (spec.kind == ModelSpec::Kind::dictionary) {
    spec.library.eval(x, ws.phi);
    const int K = spec.library.size();
    const double* phi = ws.phi.data();
    for (int i = 0; i < spec.dimension; ++i) {
      double acc = 0.0;
      const double* row = ws.coeff.data();  // column-major: stride over rows
      for (int k = 0; k < K; ++k) acc += row[static_cast<size_t>(k) * spec.dimension + i] * phi[k];
      out[i] = acc;
    }
    if (spec.closure) {
      spec.closure->add_contribution(ws.closure_w.data(), x, out, ws.mlp);
    }
  } else {
    ws.x_phys.array() = spec.sigma.array() * x.array();
    glycolysis_rhs(ws.scalars, ws.x_phys.data(), out.data());
    out.array() /= spec.sigma.array();
  }
  for (int i = 0; i < spec.dimension; ++i) {
    if (!std::isfinite(out[i])) return false;
  }
  return true;
}

void vjp_rhs_bound(const ModelSpec& spec, const Eigen::VectorXd& x, double t,
                   const Eigen::VectorXd& cotangent, Eigen::Ref<Eigen::VectorXd> x_bar,
                   Eigen::Ref<Eigen::VectorXd> theta_bar, EvalWorkspace& ws) {
  (void)t;
  if (!ws.bound) throw std::logic_error("model: bind_parameters must run before evaluation");
  if (spec.kind == ModelSpec::Kind::dictionary) {
    const int K = spec.library.size();
    const int D = spec.dimension;
    spec.library.eval_with_jacobian(x, ws.phi, ws.phi_jac);

    // x_bar_j = sum_k (A^T cot)_k dphi_k/dx_j
    x_bar.setZero();
    const double* phi = ws.phi.data();
    for (int k = 0; k < K; ++k) {
      double wk = 0.0;
      for (int i = 0; i < D; ++i) wk += ws.coeff(i, k) * cotangent[i];
      if (wk != 0.0) {
        for (int j = 0; j < D; ++j) x_bar[j] += wk * ws.phi_jac(k, j);
      }
    }

    // dtheta for masked coefficients: cot_i * phi_k
    for (int i = 0; i < D; ++i) {
      const double ci = cotangent[i];
      if (ci == 0.0) continue;
      const size_t base = static_cast<size_t>(i) * K;
      for (int k = 0; k < K; ++k) {
        const int p = ws.coeff_theta[base + k];
        if (p >= 0) theta_bar[p] += ci * phi[k];
      }
    }

    if (spec.closure) {
      const int nw = spec.closure->parameter_count();
      spec.closure->vjp(ws.closure_w.data(), x, cotangent, x_bar,
                        theta_bar.data() + (theta_bar.size() - nw), ws.mlp);
    }
  } else {
    // f~(x~) = S^-1 f(S x~): push the cotangent through the scaling, run the
    // physical reverse pass, and scale the state cotangent back.
    ws.x_phys.array() = spec.sigma.array() * x.array();
    ws.cot_scaled.array() = cotangent.array() / spec.sigma.array();
    std::array<double, kGlycolysisScalarCount> p_bar{};
    glycolysis_vjp(ws.scalars, ws.x_phys.data(), ws.cot_scaled.data(), x_bar.data(),
                   p_bar.data());
    x_bar.array() *= spec.sigma.array();
    for (int s = 0; s < kGlycolysisScalarCount; ++s) {
      const int p = ws.scalar_theta[static_cast<size_t>(s)];
      // theta_p = log(scalar): chain rule multiplies by the physical value
      if (p >= 0) theta_bar[p] += p_bar[static_cast<size_t>(s)] * ws.scalars[static_cast<size_t>(s)];
    }
  }
}

Eigen::VectorXd eval_rhs(const ModelSpec& spec, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& x, double t) {
  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, theta, ws);
  Eigen::VectorXd out(spec.dimension);
  eval_rhs_bound(spec, x, t, out, ws);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> vjp_rhs(const ModelSpec& spec,
                                                    const Eigen::VectorXd& theta,
                                                    const Eigen::VectorXd& x, double t,
                                                    const Eigen::VectorXd& cotangent) {
  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, theta, ws);
  Eigen::VectorXd x_bar(spec.dimension);
  Eigen::VectorXd theta_bar = Eigen::VectorXd::Zero(spec.parameter_count());
  vjp_rhs_bound(spec, x, t, cotangent, x_bar, theta_bar, ws);
  return {std::move(x_bar), std::move(theta_bar)};
}

namespace {

Eigen::VectorXd scale_coefficients(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& sigma, bool to_physical) {
  if (theta.size() != spec.parameter_count())
    throw std::invalid_argument("coefficient scaling: theta length mismatch");
  Eigen::VectorXd out = theta;
  if (spec.kind == ModelSpec::Kind::glycolysis) {
    const int n = spec.dictionary_parameter_count();
    for (int p = 0; p < n; ++p) out[p] = to_physical ? std::exp(theta[p]) : std::log(theta[p]);
    return out;
  }
  if ((sigma.array() <= 0.0).any())
    throw std::invalid_argument("coefficient scaling: sigma must be strictly positive");
  if (!spec.library.monomials_only())
    throw std::invalid_argument(
        "coefficient scaling: sin/cos features have no closed-form rescaling; "
        "monomial-only libraries required");
  const int K = spec.library.size();
  int p = 0;
  for (int i = 0; i < spec.dimension; ++i) {
    for (int k = 0; k < K; ++k) {
      if (!spec.masked(i, k)) continue;
      double factor = sigma[i];
      const Eigen::VectorXi& e = spec.library.feature(k).exponents;
      for (int j = 0; j < spec.dimension; ++j) {
        for (int r = 0; r < e[j]; ++r) factor /= sigma[j];
      }
      out[p] = to_physical ? theta[p] * factor : theta[p] / factor;
      ++p;
    }
  }
  // closure weights pass through; their physical output needs the sigma wrap
  return out;
}

}  // namespace

Eigen::VectorXd denormalize_coefficients(const ModelSpec& spec,
                                         const Eigen::VectorXd& theta_normalized,
                                         const Eigen::VectorXd& sigma) {
  return scale_coefficients(spec, theta_normalized, sigma, true);
}

Eigen::VectorXd normalize_coefficients(const ModelSpec& spec,
                                       const Eigen::VectorXd& theta_physical,
                                       const Eigen::VectorXd& sigma) {
  return scale_coefficients(spec, theta_physical, sigma, false);
}

std::vector<std::string> parameter_labels(const ModelSpec& spec) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<size_t>(spec.parameter_count()));
  if (spec.kind == ModelSpec::Kind::glycolysis) {
    for (int s = 0; s < kGlycolysisScalarCount; ++s) {
      if (spec.scalar_mask[static_cast<size_t>(s)])
        labels.push_back("log(" + glycolysis_scalar_names()[static_cast<size_t>(s)] + ")");
    }
    return labels;
  }
  for (int i = 0; i < spec.dimension; ++i) {
    for (int k = 0; k < spec.library.size(); ++k) {
      if (spec.masked(i, k))
        labels.push_back("eq" + std::to_string(i + 1) + ":" + spec.library.describe(k));
    }
  }
  for (int w = 0; w < spec.closure_parameter_count(); ++w) {
    labels.push_back("mlp:w" + std::to_string(w));
  }
  return labels;
}

std::string ModelSpec::to_json_string() const {
  nlohmann::ordered_json j;
  j["theta_layout"] =
      "masked dictionary coefficients row-major by (equation, feature) with features in "
      "graded-lex order, then closure weights layer by layer (row-major weight matrix, then "
      "bias); glycolysis kind: log of each masked scalar in canonical name order";
  j["kind"] = kind == Kind::dictionary ? "dictionary" : "glycolysis";
  j["dimension"] = dimension;
  if (kind == Kind::dictionary) {
    nlohmann::ordered_json lib;
    lib["max_degree"] = library.max_degree();
    nlohmann::ordered_json transforms = nlohmann::ordered_json::array();
    for (const Transform& t : library.transforms()) {
      transforms.push_back({{"kind", t.kind == Transform::Kind::sine ? "sin" : "cos"},
                            {"coordinate", t.coordinate}});
    }
    lib["transforms"] = transforms;
    j["library"] = lib;
    nlohmann::ordered_json mask_rows = nlohmann::ordered_json::array();
    nlohmann::ordered_json fixed_rows = nlohmann::ordered_json::array();
    for (int i = 0; i < dimension; ++i) {
      nlohmann::ordered_json mrow = nlohmann::ordered_json::array();
      nlohmann::ordered_json frow = nlohmann::ordered_json::array();
      for (int k = 0; k < library.size(); ++k) {
        mrow.push_back(masked(i, k));
        frow.push_back(fixed_coefficients(i, k));
      }
      mask_rows.push_back(mrow);
      fixed_rows.push_back(frow);
    }
    j["mask"] = mask_rows;
    j["fixed_coefficients"] = fixed_rows;
    if (closure) {
      j["closure"] = {{"inputs", closure->input_indices()},
                      {"outputs", closure->output_indices()},
                      {"hidden", closure->hidden_widths()}};
    } else {
      j["closure"] = nullptr;
    }
  } else {
    nlohmann::ordered_json sm = nlohmann::ordered_json::array();
    nlohmann::ordered_json fs = nlohmann::ordered_json::array();
    for (int s = 0; s < kGlycolysisScalarCount; ++s) {
      sm.push_back(scalar_mask[static_cast<size_t>(s)] != 0);
      fs.push_back(fixed_scalars[static_cast<size_t>(s)]);
    }
    j["scalar_names"] = glycolysis_scalar_names();
    j["scalar_mask"] = sm;
    j["fixed_scalars"] = fs;
  }
  std::vector<double> sig(sigma.data(), sigma.data() + sigma.size());
  j["sigma"] = sig;
  return j.dump(2);
}

ModelSpec ModelSpec::from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ModelSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  const int dimension = j.at("dimension").get<int>();
  if (kind == "dictionary") {
    std::vector<Transform> transforms;
    for (const auto& t : j.at("library").at("transforms")) {
      transforms.push_back({t.at("kind").get<std::string>() == "sin" ? Transform::Kind::sine
                                                                     : Transform::Kind::cosine,
                            t.at("coordinate").get<int>()});
    }
    FeatureLibrary lib = FeatureLibrary::polynomial(
        dimension, j.at("library").at("max_degree").get<int>(), transforms);
    spec = ModelSpec::dictionary(dimension, lib);
    const auto& mask_rows = j.at("mask");
    const auto& fixed_rows = j.at("fixed_coefficients");
    for (int i = 0; i < dimension; ++i) {
      for (int k = 0; k < lib.size(); ++k) {
        spec.set_mask(i, k, mask_rows.at(static_cast<size_t>(i)).at(static_cast<size_t>(k)).get<bool>());
        spec.fixed_coefficients(i, k) =
            fixed_rows.at(static_cast<size_t>(i)).at(static_cast<size_t>(k)).get<double>();
      }
    }
    if (!j.at("closure").is_null()) {
      spec.closure = MlpClosure(j.at("closure").at("inputs").get<std::vector<int>>(),
                                j.at("closure").at("outputs").get<std::vector<int>>(),
                                j.at("closure").at("hidden").get<std::vector<int>>());
    }
  } else if (kind == "glycolysis") {
    Eigen::VectorXd sigma = Eigen::VectorXd::Ones(7);
    spec = ModelSpec::glycolysis_calibration(sigma);
    const auto& sm = j.at("scalar_mask");
    const auto& fs = j.at("fixed_scalars");
    for (int s = 0; s < kGlycolysisScalarCount; ++s) {
      spec.scalar_mask[static_cast<size_t>(s)] = sm.at(static_cast<size_t>(s)).get<bool>() ? 1 : 0;
      spec.fixed_scalars[static_cast<size_t>(s)] = fs.at(static_cast<size_t>(s)).get<double>();
    }
  } else {
    throw std::invalid_argument("model spec: unknown kind '" + kind + "'");
  }
  const auto sig = j.at("sigma").get<std::vector<double>>();
  if (static_cast<int>(sig.size()) != dimension)
    throw std::invalid_argument("model spec: sigma length mismatch");
  spec.sigma = Eigen::Map<const Eigen::VectorXd>(sig.data(), dimension);
  if ((spec.sigma.array() <= 0.0).any())
    throw std::invalid_argument("model spec: sigma must be strictly positive");
  return spec;
}

}  // namespace bsid
