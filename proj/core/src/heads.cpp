#include <cmath>
#include <numbers>

#include "goldmine/error.hpp"
#include "goldmine/net.hpp"

namespace goldmine::net {
namespace {

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

Vector softmax(const Vector& a) {
  const double m = a.maxCoeff();
  Vector e = (a.array() - m).exp();
  return e / e.sum();
}

double log_sum_exp(const Vector& a) {
  const double m = a.maxCoeff();
  return m + std::log((a.array() - m).exp().sum());
}

int bin_index(double target, int bins) {
  const auto x = static_cast<long>(std::lround(target));
  if (x < 0 || x >= bins || static_cast<double>(x) != target) {
    throw Error(ErrorCode::data, "net: softmax target outside bin range");
  }
  return static_cast<int>(x);
}

/// Per-example mixture quantities in standardized target space.
struct MixtureTerms {
  int C, D;
  Vector logits;   // C
  Matrix mean;     // D x C
  Matrix raw_s;    // D x C
  Matrix sigma;    // D x C
  Matrix sig_s;    // sigmoid of raw_s, D x C
  Matrix z;        // (x - mean)/sigma
  Vector comp_log; // per-component log density
  Vector w;        // posterior responsibilities
  Vector pi;       // prior weights
  double value;    // log density (standardized space)
};

MixtureTerms mixture_terms(const HeadSpec& head, const double* raw, const Vector& x) {
  MixtureTerms t;
  t.C = head.components;
  t.D = head.out_dim;
  const int C = t.C, D = t.D;
  t.logits = Eigen::Map<const Vector>(raw, C);
  t.mean = Eigen::Map<const Matrix>(raw + C, D, C);
  t.raw_s = Eigen::Map<const Matrix>(raw + C + C * D, D, C);
  t.sigma.resize(D, C);
  t.sig_s.resize(D, C);
  t.z.resize(D, C);
  t.comp_log.resize(C);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (int c = 0; c < C; ++c) {
    double lc = 0.0;
    for (int i = 0; i < D; ++i) {
      const double s = t.raw_s(i, c);
      const double sigma = softplus(s) + kMixtureScaleFloor;
      const double z = (x(i) - t.mean(i, c)) / sigma;
      t.sigma(i, c) = sigma;
      t.sig_s(i, c) = sigmoid(s);
      t.z(i, c) = z;
      lc += -half_log_2pi - std::log(sigma) - 0.5 * z * z;
    }
    t.comp_log(c) = lc;
  }
  const Vector joint = t.logits + t.comp_log;
  t.w = softmax(joint);
  t.pi = softmax(t.logits);
  t.value = log_sum_exp(joint) - log_sum_exp(t.logits);
  return t;
}

}  // namespace

HeadValue head_value(const Network& net, const Matrix& raw, const Matrix& targets) {
  const HeadSpec& head = net.spec().head;
  const Eigen::Index batch = raw.cols();
  HeadValue out;
  out.value.resize(batch);
  out.grad = Matrix::Zero(raw.rows(), batch);

  switch (head.kind) {
    case HeadKind::scalar:
      out.value = raw.row(0);
      out.grad.setOnes();
      break;
    case HeadKind::vector:
      throw Error(ErrorCode::config, "net: vector head has no scalar read-out");
    case HeadKind::softmax:
      if (targets.rows() != 1 || targets.cols() != batch) {
        throw Error(ErrorCode::config, "net: softmax head needs one target row");
      }
      for (Eigen::Index b = 0; b < batch; ++b) {
        const int x = bin_index(targets(0, b), head.bins);
        const Vector p = softmax(raw.col(b));
        out.value(b) = raw(x, b) - log_sum_exp(raw.col(b));
        out.grad.col(b) = -p;
        out.grad(x, b) += 1.0;
      }
      break;
    case HeadKind::mixture: {
      if (targets.rows() != head.out_dim || targets.cols() != batch) {
        throw Error(ErrorCode::config, "net: mixture target dimension mismatch");
      }
      const Matrix xs = net.target_scaling.apply(targets);
      const double log_jac = net.target_scaling.scale.array().log().sum();
      const int C = head.components, D = head.out_dim;
      for (Eigen::Index b = 0; b < batch; ++b) {
        const MixtureTerms t = mixture_terms(head, raw.col(b).data(), xs.col(b));
        out.value(b) = t.value - log_jac;
        auto g = out.grad.col(b);
        g.head(C) = t.w - t.pi;
        for (int c = 0; c < C; ++c) {
          for (int i = 0; i < D; ++i) {
            const double z = t.z(i, c), s = t.sigma(i, c);
            g(C + c * D + i) = t.w(c) * z / s;
            g(C + C * D + c * D + i) = t.w(c) * (z * z - 1.0) / s * t.sig_s(i, c);
          }
        }
      }
      break;
    }
  }
  return out;
}

Matrix head_hvp(const Network& net, const Matrix& raw, const Matrix& targets, const Matrix& dir) {
  const HeadSpec& head = net.spec().head;
  const Eigen::Index batch = raw.cols();
  Matrix out = Matrix::Zero(raw.rows(), batch);
  switch (head.kind) {
    case HeadKind::scalar:
      break;
    case HeadKind::vector:
      throw Error(ErrorCode::config, "net: vector head has no scalar read-out");
    case HeadKind::softmax:
      for (Eigen::Index b = 0; b < batch; ++b) {
        const Vector p = softmax(raw.col(b));
        const Vector v = dir.col(b);
        out.col(b) = -(p.cwiseProduct(v) - p * p.dot(v));
      }
      break;
    case HeadKind::mixture: {
      const Matrix xs = net.target_scaling.apply(targets);
      const int C = head.components, D = head.out_dim;
      for (Eigen::Index b = 0; b < batch; ++b) {
        const MixtureTerms t = mixture_terms(head, raw.col(b).data(), xs.col(b));
        const Vector va = dir.col(b).head(C);
        const Eigen::Map<const Matrix> vm(dir.col(b).data() + C, D, C);
        const Eigen::Map<const Matrix> vs(dir.col(b).data() + C + C * D, D, C);

        Matrix dsigma(D, C), dz(D, C);
        Vector dcomp(C);
        for (int c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int i = 0; i < D; ++i) {
            const double s = t.sigma(i, c), z = t.z(i, c);
            dsigma(i, c) = t.sig_s(i, c) * vs(i, c);
            dz(i, c) = (-vm(i, c) - z * dsigma(i, c)) / s;
            acc += -dsigma(i, c) / s - z * dz(i, c);
          }
          dcomp(c) = acc;
        }
        const Vector djoint = va + dcomp;
        const Vector dw = t.w.cwiseProduct((djoint.array() - t.w.dot(djoint)).matrix());
        const Vector dpi = t.pi.cwiseProduct((va.array() - t.pi.dot(va)).matrix());

        auto h = out.col(b);
        h.head(C) = dw - dpi;
        for (int c = 0; c < C; ++c) {
          for (int i = 0; i < D; ++i) {
            const double s = t.sigma(i, c), z = t.z(i, c), q = t.sig_s(i, c);
            const double ds = dsigma(i, c), dzi = dz(i, c);
            // g_m = w z / s
            h(C + c * D + i) = dw(c) * z / s + t.w(c) * (dzi / s - z * ds / (s * s));
            // g_s = w (z^2 - 1) / s * q,  dq = q (1 - q) v_s
            const double a = (z * z - 1.0) / s;
            const double da = 2.0 * z * dzi / s - (z * z - 1.0) * ds / (s * s);
            h(C + C * D + c * D + i) =
                dw(c) * a * q + t.w(c) * (da * q + a * q * (1.0 - q) * vs(i, c));
          }
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace goldmine::net
