#include "tmm/rng.hpp"

#include <cmath>

#include "tmm/errors.hpp"

namespace tmm {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) {
  key_ = mix64(mix64(seed + kGolden) ^ (stream + 0xBF58476D1CE4E5B9ULL));
}

std::uint64_t CounterRng::bits(std::uint64_t i) const {
  // splitmix64 with starting state key_, evaluated at counter i.
  return mix64(key_ + (i + 1) * kGolden);
}

double CounterRng::uniform(std::uint64_t i) const {
  return (static_cast<double>(bits(i) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t i) const {
  return inverse_normal_cdf(uniform(i));
}

std::uint64_t CounterRng::below(std::uint64_t i, std::uint64_t n) const {
  return static_cast<std::uint64_t>(uniform(i) * static_cast<double>(n)) % n;
}

std::uint64_t CounterRng::derive(std::uint64_t seed, std::uint64_t purpose,
                                 std::uint64_t index) {
  std::uint64_t h = mix64(seed + kGolden);
  h = mix64(h ^ purpose);
  h = mix64(h + index * kGolden);
  return h;
}

std::uint64_t CounterRng::tag(const char* name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char* c = name; *c != '\0'; ++c) {
    h ^= static_cast<unsigned char>(*c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    fail_validation("inverse normal CDF needs p strictly inside (0, 1)");
  }
  // Wichura's AS 241 (PPND16), accurate to ~1e-16 relative.
  static constexpr double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e+2,
      1.9715909503065514427e+3, 1.3731693765509461125e+4,
      4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr double b[8] = {
      1.0,                      4.2313330701600911252e+1,
      6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4,
      2.8729085735721942674e+4, 5.2264952788528545610e+3};
  static constexpr double c[8] = {
      1.42343711074968357734e0,  4.63033784615654529590e0,
      5.76949722146069140550e0,  3.64784832476320460504e0,
      1.27045825245236838258e0,  2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {
      1.0,                       2.05319162663775882187e0,
      1.67638483018380384940e0,  6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr double e[8] = {
      6.65790464350110377720e0,  5.46378491116411436990e0,
      1.78482653991729133580e0,  2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {
      1.0,                       5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  auto poly = [](const double (&coef)[8], double x) {
    double v = coef[7];
    for (int i = 6; i >= 0; --i) v = v * x + coef[i];
    return v;
  };

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(a, r) / poly(b, r);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = poly(c, r) / poly(d, r);
  } else {
    r -= 5.0;
    value = poly(e, r) / poly(f, r);
  }
  return (q < 0.0) ? -value : value;
}

}  // namespace tmm
