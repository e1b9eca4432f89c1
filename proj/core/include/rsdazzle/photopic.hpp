#pragma once

#include <functional>
#include <vector>

namespace rsdazzle {

// Observer and background parameters for the visibility model. Internal units
// are SI throughout: cd/m^2 for luminance, W/m^2 for irradiance, degrees for
// the off-axis angle, nm for wavelength.
struct PhotopicScene {
  double theta_deg = 5.0;    // off-axis viewing angle, > 0
  double age_years = 25.0;   // observer age
  double pigment = 1.0;      // eye pigment factor
  double l_b_cd_m2 = 10.0;   // background luminance, > 0
  double e_sensor_w_m2 = 500.0;  // at-aperture irradiance when the source is on, > 0
  double lambda_nm = 650.0;  // source wavelength, in [360, 830]
  double s_coeff = 1.0;      // scattering scale
  double t_exponent = 0.0;   // background-luminance exponent
  // Threshold contrast as a function of background luminance; constant 1
  // (small-target recognition contrast) unless configured otherwise.
  std::function<double(double)> c_thr = [](double) { return 1.0; };

  void validate() const;  // throws std::domain_error on violated bounds
};

// Angular scattering of the eye for an off-axis source, in 1/sr.
// theta in degrees, age in years, pigment dimensionless. theta <= 0 is a
// domain error (the expression is singular at zero).
double g_eye(double theta_deg, double age_years, double pigment);

// Effective collection of the eye: S * L_b^T * g_eye, in 1/sr.
double f_eye(const PhotopicScene& scene);

// Photopic luminous efficiency at the given wavelength; linear interpolation
// of the embedded CIE 5 nm table, domain [360, 830] nm.
double photopic_efficacy(double lambda_nm);

// Perceived source luminance for a pulsed source at the given duty cycle:
// d.c. * e * 683 * V_lambda * f_eye, in cd/m^2.
double source_luminance(double duty_cycle, const PhotopicScene& scene);

// Weber contrast (l_as - l_b) / l_b. l_b <= 0 is a domain error.
double contrast(double l_as_cd_m2, double l_b_cd_m2);

// Largest duty cycle at which the source stays at the observer's threshold
// contrast: L_b^(1-T) * (C_thr(L_b)+1) / (e * 683 * V_lambda * S * g_eye).
double duty_cycle_threshold(const PhotopicScene& scene);

// Fraction of time a pulse train is on: pulse_count * width * frame_rate.
double duty_cycle_of_train(int pulse_count, double width_us, double frame_rate_hz);

struct ThresholdCell {
  double theta_deg;
  double l_b_cd_m2;
  double duty_cycle;
};

// duty_cycle_threshold on the Cartesian grid, rows ordered by (theta, l_b)
// ascending. Element failures are rethrown annotated with the grid point.
std::vector<ThresholdCell> threshold_surface(const std::vector<double>& theta_grid,
                                             const std::vector<double>& l_b_grid,
                                             const PhotopicScene& base);

// One (theta, background, duty-cycle) point the scattering scale is fit to.
struct VisibilityAnchor {
  double theta_deg;
  double l_b_cd_m2;
  double duty_cycle;
};

struct SceneScaling {
  double s_coeff;
  double t_exponent;
};

// Solves S and T so duty_cycle_threshold passes through both anchors, taking
// age, pigment, irradiance, wavelength and threshold contrast from `base`.
// The system is linear in (ln S, 1-T) and solves exactly when the anchors
// have distinct background luminances; with equal backgrounds the exponent is
// unidentifiable and the minimum-norm least-squares solution is returned.
SceneScaling calibrate_scaling(const VisibilityAnchor& a1, const VisibilityAnchor& a2,
                               const PhotopicScene& base);

// Built-in calibration against the published visibility anchors
// (0.01% duty cycle at 5 degrees, 0.85% at 15 degrees) evaluated at the
// reference scene below.
SceneScaling default_calibration();

// Reference scene: L_b = 10 cd/m^2, e = 500 W/m^2 (50 mW/cm^2),
// lambda = 650 nm, A = 25, p = 1, C_thr = 1, with S and T from
// default_calibration().
PhotopicScene reference_scene();

}  // namespace rsdazzle
