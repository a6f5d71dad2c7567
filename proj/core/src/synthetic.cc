#include <algorithm>
#include <cmath>

#include "clustercal/data.h"
#include "clustercal/error.h"
#include "clustercal/random.h"

namespace clustercal {

void SyntheticSpec::validate() const {
  if (n_subpops == 0) throw ValidationError("synthetic: n_subpops must be >= 1");
  if (samples_per_subpop == 0) throw ValidationError("synthetic: samples_per_subpop must be >= 1");
  if (d == 0) throw ValidationError("synthetic: d must be >= 1");
  if (positive_rates.size() != n_subpops || logit_offsets.size() != n_subpops) {
    throw ValidationError("synthetic: positive_rates and logit_offsets need one entry per subpop");
  }
  for (double r : positive_rates) {
    if (!(r > 0.0 && r < 1.0)) throw ValidationError("synthetic: positive rates must be in (0,1)");
  }
  for (double o : logit_offsets) {
    if (!std::isfinite(o)) throw ValidationError("synthetic: offsets must be finite");
  }
  if (!(noise_scale > 0.0)) throw ValidationError("synthetic: noise_scale must be positive");
  if (!(separation >= 0.0)) throw ValidationError("synthetic: separation must be non-negative");
}

SyntheticData gen_synthetic_full(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_subpops * spec.samples_per_subpop;
  SyntheticData out;
  auto& ds = out.dataset;
  ds.features = Matrix(n, spec.d);
  ds.labels.resize(n);
  ds.sample_ids.resize(n);
  for (std::size_t j = 0; j < spec.d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  out.subpop.resize(n);
  out.true_probability.resize(n);
  out.miscalibrated_margin.resize(n);

  Rng rng(spec.seed);
  std::size_t i = 0;
  for (std::size_t g = 0; g < spec.n_subpops; ++g) {
    const double rate = spec.positive_rates[g];
    const double half_width = 0.8 * std::min(rate, 1.0 - rate);
    const std::size_t axis = g % spec.d;
    const double shift = spec.separation * static_cast<double>(1 + g / spec.d);
    for (std::size_t s = 0; s < spec.samples_per_subpop; ++s, ++i) {
      auto row = ds.features.row(i);
      double first_noise = 0.0;
      for (std::size_t j = 0; j < spec.d; ++j) {
        const double eps = rng.normal();
        if (j == 0) first_noise = eps;
        row[j] = spec.noise_scale * eps + (j == axis ? shift : 0.0);
      }
      const double p = rate + half_width * std::tanh(first_noise);
      const int y = rng.uniform() < p ? 1 : 0;
      ds.labels[i] = y;
      ds.sample_ids[i] = "s" + std::to_string(g) + "_" + std::to_string(s);
      out.subpop[i] = static_cast<int>(g);
      out.true_probability[i] = p;
      out.miscalibrated_margin[i] = std::log(p / (1.0 - p)) + spec.logit_offsets[g];
    }
  }
  return out;
}

Dataset gen_synthetic(const SyntheticSpec& spec) { return gen_synthetic_full(spec).dataset; }

}  // namespace clustercal
