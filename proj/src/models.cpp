#include "binscatter/models.hpp"

#include <cmath>
#include <sstream>

#include "binscatter/error.hpp"

namespace binscatter {

ModelSpec ModelSpec::quantile(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "quantile level must lie in (0, 1)");
  }
  return {Family::Quantile, tau};
}

ModelSpec ModelSpec::huber(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidArgument, "Huber threshold must be positive");
  }
  return {Family::Huber, tau};
}

ModelSpec ModelSpec::parse(std::string_view text) {
  if (text == "ls") return least_squares();
  if (text == "logit") return logit();
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto head = text.substr(0, colon);
    const std::string tail(text.substr(colon + 1));
    char* end = nullptr;
    const double tau = std::strtod(tail.c_str(), &end);
    if (tail.empty() || end != tail.c_str() + tail.size()) {
      throw Error(ErrorCode::InvalidArgument, "cannot parse model parameter '" + tail + "'");
    }
    if (head == "quantile") return quantile(tau);
    if (head == "huber") return huber(tau);
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown model '" + std::string(text) + "' (expected ls, logit, quantile:<tau>, huber:<tau>)");
}

std::string ModelSpec::to_string() const {
  std::ostringstream out;
  out.precision(17);
  switch (family) {
    case Family::LeastSquares: return "ls";
    case Family::Logit: return "logit";
    case Family::Quantile: out << "quantile:" << tau; break;
    case Family::Huber: out << "huber:" << tau; break;
  }
  return out.str();
}

double logistic(double theta) noexcept {
  if (theta >= 0.0) return 1.0 / (1.0 + std::exp(-theta));
  const double e = std::exp(theta);
  return e / (1.0 + e);
}

double link(const ModelSpec& m, double theta) noexcept {
  return m.family == Family::Logit ? logistic(theta) : theta;
}

double link_d1(const ModelSpec& m, double theta) noexcept {
  if (m.family != Family::Logit) return 1.0;
  const double e = logistic(theta);
  return e * (1.0 - e);
}

double link_d2(const ModelSpec& m, double theta) noexcept {
  if (m.family != Family::Logit) return 0.0;
  const double e = logistic(theta);
  return e * (1.0 - e) * (1.0 - 2.0 * e);
}

void check_outcome(const ModelSpec& m, double y) {
  if (!std::isfinite(y)) throw Error(ErrorCode::DomainError, "outcome is not finite");
  if (m.family == Family::Logit && (y < 0.0 || y > 1.0)) {
    std::ostringstream msg;
    msg << "logit outcome " << y << " outside [0, 1]";
    throw Error(ErrorCode::DomainError, msg.str());
  }
}

namespace {

// log(1 + e^t) without overflow
double softplus(double t) noexcept {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sign(double r) noexcept { return (r > 0.0) - (r < 0.0); }

}  // namespace

double rho(const ModelSpec& m, double y, double theta) {
  check_outcome(m, y);
  switch (m.family) {
    case Family::LeastSquares: {
      const double r = y - theta;
      return 0.5 * r * r;
    }
    case Family::Logit:
      // -[y log eta + (1-y) log(1-eta)] = softplus(theta) - y theta
      return softplus(theta) - y * theta;
    case Family::Quantile: {
      const double r = y - theta;
      return r * (m.tau - (r < 0.0 ? 1.0 : 0.0));
    }
    case Family::Huber: {
      const double r = std::abs(y - theta);
      return r <= m.tau ? r * r : m.tau * (2.0 * r - m.tau);
    }
  }
  return 0.0;
}

double psi_dagger(const ModelSpec& m, double r) noexcept {
  switch (m.family) {
    case Family::LeastSquares:
    case Family::Logit: return -r;
    case Family::Quantile: return (r < 0.0 ? 1.0 : 0.0) - m.tau;
    case Family::Huber:
      return std::abs(r) <= m.tau ? -2.0 * r : -2.0 * m.tau * sign(r);
  }
  return 0.0;
}

double psi_ddagger(const ModelSpec& m, double eta) {
  if (m.family != Family::Logit) return 1.0;
  if (!(eta > 0.0 && eta < 1.0)) {
    throw Error(ErrorCode::DomainError, "logit mean must lie strictly inside (0, 1)");
  }
  return 1.0 / (eta * (1.0 - eta));
}

double psi(const ModelSpec& m, double y, double eta) {
  check_outcome(m, y);
  return psi_dagger(m, y - eta) * psi_ddagger(m, eta);
}

double curvature_weight(const ModelSpec& m, double y, double theta) {
  switch (m.family) {
    case Family::LeastSquares: return 1.0;
    case Family::Logit: return link_d1(m, theta);
    case Family::Huber: return std::abs(y - theta) <= m.tau ? 2.0 : 0.0;
    case Family::Quantile: break;
  }
  throw Error(ErrorCode::InvalidArgument, "quantile curvature requires the density estimate");
}

double score_weight(const ModelSpec& m, double y, double theta) {
  if (m.family == Family::Logit) {
    // psi * eta' = -(y - eta)
    const double r = y - logistic(theta);
    return r * r;
  }
  const double s = psi_dagger(m, y - theta);
  return s * s;
}

LossTerms theta_loss(const ModelSpec& m, double y, double theta, double kappa) {
  LossTerms t;
  const double r = y - theta;
  switch (m.family) {
    case Family::LeastSquares:
      t.value = 0.5 * r * r;
      t.grad = -r;
      t.hess = t.irls = 1.0;
      break;
    case Family::Logit: {
      const double e = logistic(theta);
      t.value = softplus(theta) - y * theta;
      t.grad = e - y;
      t.hess = t.irls = e * (1.0 - e);
      break;
    }
    case Family::Huber: {
      const double a = std::abs(r);
      if (a <= m.tau) {
        t.value = r * r;
        t.grad = -2.0 * r;
        t.hess = 2.0;
        t.irls = 2.0;
      } else {
        t.value = m.tau * (2.0 * a - m.tau);
        t.grad = -2.0 * m.tau * sign(r);
        t.hess = 0.0;
        t.irls = 2.0 * m.tau / a;
      }
      break;
    }
    case Family::Quantile: {
      const double tau = m.tau;
      if (kappa <= 0.0) {
        t.value = r * (tau - (r < 0.0 ? 1.0 : 0.0));
        t.grad = (r < 0.0 ? 1.0 : 0.0) - tau;
        break;
      }
      // Moreau envelope of the check function with parameter kappa
      if (r > tau * kappa) {
        t.value = tau * r - 0.5 * tau * tau * kappa;
        t.grad = -tau;
        t.irls = tau / r;
      } else if (r < -(1.0 - tau) * kappa) {
        t.value = (tau - 1.0) * r - 0.5 * (1.0 - tau) * (1.0 - tau) * kappa;
        t.grad = 1.0 - tau;
        t.irls = (tau - 1.0) / r;
      } else {
        t.value = r * r / (2.0 * kappa);
        t.grad = -r / kappa;
        t.hess = 1.0 / kappa;
        t.irls = 1.0 / kappa;
      }
      break;
    }
  }
  return t;
}

}  // namespace binscatter
