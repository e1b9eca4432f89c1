#include "rsdazzle/photopic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rsdazzle {

namespace {

constexpr double kLuminousEfficacy = 683.0;  // lm/W at the photopic peak

// CIE photopic luminous efficiency V(lambda), 360..830 nm at 5 nm steps.
constexpr double kVLambdaStart = 360.0;
constexpr double kVLambdaStep = 5.0;
constexpr double kVLambda[] = {
    0.000003917, 0.000006965, 0.000012390, 0.000022020, 0.000039000, 0.000064000,
    0.000120000, 0.000217000, 0.000396000, 0.000640000, 0.001210000, 0.002180000,
    0.004000000, 0.007300000, 0.011600000, 0.016840000, 0.023000000, 0.029800000,
    0.038000000, 0.048000000, 0.060000000, 0.073900000, 0.090980000, 0.112600000,
    0.139020000, 0.169300000, 0.208020000, 0.258600000, 0.323000000, 0.407300000,
    0.503000000, 0.608200000, 0.710000000, 0.793200000, 0.862000000, 0.914850000,
    0.954000000, 0.980300000, 0.994950000, 1.000000000, 0.995000000, 0.978600000,
    0.952000000, 0.915400000, 0.870000000, 0.816300000, 0.757000000, 0.694900000,
    0.631000000, 0.566800000, 0.503000000, 0.441200000, 0.381000000, 0.321000000,
    0.265000000, 0.217000000, 0.175000000, 0.138200000, 0.107000000, 0.081600000,
    0.061000000, 0.044580000, 0.032000000, 0.023200000, 0.017000000, 0.011920000,
    0.008210000, 0.005723000, 0.004102000, 0.002929000, 0.002091000, 0.001484000,
    0.001047000, 0.000740000, 0.000520000, 0.000361100, 0.000249200, 0.000171900,
    0.000120000, 0.000084800, 0.000060000, 0.000042400, 0.000030000, 0.000021200,
    0.000014990, 0.000010600, 0.000007465, 0.000005257, 0.000003702, 0.000002607,
    0.000001836, 0.000001293, 0.000000910, 0.000000641, 0.000000452,
};
constexpr int kVLambdaCount = static_cast<int>(sizeof(kVLambda) / sizeof(kVLambda[0]));

}  // namespace

void PhotopicScene::validate() const {
  if (!(theta_deg > 0.0)) throw std::domain_error("PhotopicScene: theta_deg must be > 0");
  if (!(l_b_cd_m2 > 0.0)) throw std::domain_error("PhotopicScene: l_b_cd_m2 must be > 0");
  if (!(e_sensor_w_m2 > 0.0)) throw std::domain_error("PhotopicScene: e_sensor_w_m2 must be > 0");
  if (age_years < 0.0) throw std::domain_error("PhotopicScene: age_years must be >= 0");
  if (lambda_nm < 360.0 || lambda_nm > 830.0)
    throw std::domain_error("PhotopicScene: lambda_nm must lie in [360, 830]");
  if (!c_thr) throw std::domain_error("PhotopicScene: c_thr model not set");
}

double g_eye(double theta_deg, double age_years, double pigment) {
  if (!(theta_deg > 0.0)) throw std::domain_error("g_eye: theta_deg must be > 0");
  const double age_term = 1.0 + (age_years / 62.5) * (age_years / 62.5);
  return 10.0 / (theta_deg * theta_deg * theta_deg) +
         (5.0 / (theta_deg * theta_deg) + 0.1 * pigment / theta_deg) * age_term +
         0.0025 * pigment;
}

double f_eye(const PhotopicScene& scene) {
  scene.validate();
  return scene.s_coeff * std::pow(scene.l_b_cd_m2, scene.t_exponent) *
         g_eye(scene.theta_deg, scene.age_years, scene.pigment);
}

double photopic_efficacy(double lambda_nm) {
  if (lambda_nm < kVLambdaStart || lambda_nm > kVLambdaStart + kVLambdaStep * (kVLambdaCount - 1))
    throw std::domain_error("photopic_efficacy: wavelength " + std::to_string(lambda_nm) +
                            " nm outside [360, 830]");
  const double pos = (lambda_nm - kVLambdaStart) / kVLambdaStep;
  const int i = std::min(static_cast<int>(pos), kVLambdaCount - 2);
  const double frac = pos - i;
  return kVLambda[i] + frac * (kVLambda[i + 1] - kVLambda[i]);
}

double source_luminance(double duty_cycle, const PhotopicScene& scene) {
  if (duty_cycle < 0.0 || duty_cycle > 1.0)
    throw std::domain_error("source_luminance: duty cycle must lie in [0,1]");
  return duty_cycle * scene.e_sensor_w_m2 * kLuminousEfficacy *
         photopic_efficacy(scene.lambda_nm) * f_eye(scene);
}

double contrast(double l_as_cd_m2, double l_b_cd_m2) {
  if (!(l_b_cd_m2 > 0.0)) throw std::domain_error("contrast: background luminance must be > 0");
  return (l_as_cd_m2 - l_b_cd_m2) / l_b_cd_m2;
}

double duty_cycle_threshold(const PhotopicScene& scene) {
  scene.validate();
  const double g = g_eye(scene.theta_deg, scene.age_years, scene.pigment);
  const double v = photopic_efficacy(scene.lambda_nm);
  const double c = scene.c_thr(scene.l_b_cd_m2);
  return std::pow(scene.l_b_cd_m2, 1.0 - scene.t_exponent) * (c + 1.0) /
         (scene.e_sensor_w_m2 * kLuminousEfficacy * v * scene.s_coeff * g);
}

double duty_cycle_of_train(int pulse_count, double width_us, double frame_rate_hz) {
  if (pulse_count < 0 || width_us < 0.0 || frame_rate_hz < 0.0)
    throw std::domain_error("duty_cycle_of_train: inputs must be nonnegative");
  return static_cast<double>(pulse_count) * (width_us * 1e-6) * frame_rate_hz;
}

std::vector<ThresholdCell> threshold_surface(const std::vector<double>& theta_grid,
                                             const std::vector<double>& l_b_grid,
                                             const PhotopicScene& base) {
  if (theta_grid.empty() || l_b_grid.empty())
    throw std::invalid_argument("threshold_surface: grids must be nonempty");
  std::vector<double> thetas = theta_grid;
  std::vector<double> lbs = l_b_grid;
  std::sort(thetas.begin(), thetas.end());
  std::sort(lbs.begin(), lbs.end());

  std::vector<ThresholdCell> out;
  out.reserve(thetas.size() * lbs.size());
  for (double th : thetas)
    for (double lb : lbs) {
      PhotopicScene s = base;
      s.theta_deg = th;
      s.l_b_cd_m2 = lb;
      try {
        out.push_back({th, lb, duty_cycle_threshold(s)});
      } catch (const std::domain_error& e) {
        throw std::domain_error("threshold_surface at theta=" + std::to_string(th) +
                                " l_b=" + std::to_string(lb) + ": " + e.what());
      }
    }
  return out;
}

SceneScaling calibrate_scaling(const VisibilityAnchor& a1, const VisibilityAnchor& a2,
                               const PhotopicScene& base) {
  auto rhs = [&](const VisibilityAnchor& a) {
    if (!(a.duty_cycle > 0.0) || !(a.l_b_cd_m2 > 0.0))
      throw std::domain_error("calibrate_scaling: anchors need positive duty cycle and luminance");
    const double g = g_eye(a.theta_deg, base.age_years, base.pigment);
    const double v = photopic_efficacy(base.lambda_nm);
    // ln(dc * e * 683 * V * g / (C+1)) = (1-T) ln L_b - ln S
    return std::log(a.duty_cycle * base.e_sensor_w_m2 * kLuminousEfficacy * v * g /
                    (base.c_thr(a.l_b_cd_m2) + 1.0));
  };
  const double b1 = rhs(a1);
  const double b2 = rhs(a2);
  const double x1 = std::log(a1.l_b_cd_m2);
  const double x2 = std::log(a2.l_b_cd_m2);

  double u, v;  // u = ln S, v = 1 - T
  if (std::abs(x1 - x2) > 1e-12) {
    v = (b1 - b2) / (x1 - x2);
    u = v * x1 - b1;
  } else {
    // Equal backgrounds leave the exponent unidentified; return the
    // minimum-norm least-squares solution of v*x - u = mean(b).
    const double m = 0.5 * (b1 + b2);
    const double denom = 1.0 + x1 * x1;
    v = m * x1 / denom;
    u = -m / denom;
  }
  return {std::exp(u), 1.0 - v};
}

SceneScaling default_calibration() {
  PhotopicScene base;
  base.age_years = 25.0;
  base.pigment = 1.0;
  base.l_b_cd_m2 = 10.0;
  base.e_sensor_w_m2 = 500.0;
  base.lambda_nm = 650.0;
  base.s_coeff = 1.0;
  base.t_exponent = 0.0;
  const VisibilityAnchor anchor_near{5.0, 10.0, 0.0001};
  const VisibilityAnchor anchor_far{15.0, 10.0, 0.0085};
  return calibrate_scaling(anchor_near, anchor_far, base);
}

PhotopicScene reference_scene() {
  PhotopicScene s;
  s.theta_deg = 5.0;
  s.age_years = 25.0;
  s.pigment = 1.0;
  s.l_b_cd_m2 = 10.0;
  s.e_sensor_w_m2 = 500.0;
  s.lambda_nm = 650.0;
  const SceneScaling cal = default_calibration();
  s.s_coeff = cal.s_coeff;
  s.t_exponent = cal.t_exponent;
  return s;
}

}  // namespace rsdazzle
