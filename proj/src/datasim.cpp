#include "mcrn/datasim.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mcrn/numerics.hpp"

namespace mcrn {

namespace {

RawDataset generate_one(const DomainSpec& spec, Domain domain, Rng& rng) {
  if (spec.n_identities < 1 || spec.samples_per_identity < 1 ||
      spec.input_dim < 1) {
    throw std::invalid_argument("generate_domains: bad spec");
  }
  if (spec.twin_pairs < 0 || 2 * spec.twin_pairs > spec.n_identities) {
    throw std::invalid_argument(
        "generate_domains: twin_pairs needs two identities per pair");
  }
  if (spec.twin_cos < 0.0 || spec.twin_cos >= 1.0) {
    throw std::invalid_argument("generate_domains: twin_cos must be in [0,1)");
  }
  if (spec.modes < 1) {
    throw std::invalid_argument("generate_domains: modes must be >= 1");
  }
  if (spec.mode_spread < 0.0) {
    throw std::invalid_argument("generate_domains: mode_spread must be >= 0");
  }
  const int d = spec.input_dim;

  // Identity centers: random directions, each orthogonalized against the
  // earlier ones while the dimension lasts (plain normalized directions
  // afterwards), scaled so the per-coordinate RMS equals center_spread.
  // Mutually orthogonal centers keep the between-identity distances free of
  // the near-collision tail that plain gaussian draws produce.
  std::vector<std::vector<double>> centers(spec.n_identities,
                                           std::vector<double>(d));
  const double center_norm = spec.center_spread * std::sqrt(d);
  for (int id = 0; id < spec.n_identities; ++id) {
    auto& c = centers[id];
    while (true) {
      for (double& x : c) x = rng.gaussian();
      if (id < d) {
        for (int prev = 0; prev < id; ++prev) {
          const double proj = dot(c, centers[prev]) / squared_norm(centers[prev]);
          for (int i = 0; i < d; ++i) c[i] -= proj * centers[prev][i];
        }
      }
      const double n2 = squared_norm(c);
      if (n2 > 1e-12) {
        const double scale = center_norm / std::sqrt(n2);
        for (double& x : c) x *= scale;
        break;
      }
      // A linearly dependent draw; try a fresh direction.
    }
  }

  // Look-alike pairs: rotate center 2t+1 toward center 2t until their
  // directions have cosine twin_cos. Pure post-transform of the centers
  // already drawn, so the random stream layout is unaffected.
  for (int t = 0; t < spec.twin_pairs; ++t) {
    const int a = 2 * t;
    const int b = 2 * t + 1;
    const auto& ca = centers[a];
    auto& cb = centers[b];
    const double na = std::sqrt(squared_norm(ca));
    const double along = dot(cb, ca) / na;
    std::vector<double> w(d);
    for (int i = 0; i < d; ++i) w[i] = cb[i] - along * ca[i] / na;
    const double wn2 = squared_norm(w);
    if (wn2 <= 1e-12) continue;  // already (anti)parallel, leave it alone
    const double wn = std::sqrt(wn2);
    const double nb = std::sqrt(squared_norm(cb));
    const double ortho = std::sqrt(1.0 - spec.twin_cos * spec.twin_cos);
    for (int i = 0; i < d; ++i) {
      cb[i] = nb * (spec.twin_cos * ca[i] / na + ortho * w[i] / wn);
    }
  }

  // Appearance modes: per identity, modes-1 displaced sub-centers; mode 0
  // sits on the identity center itself. Unimodal specs draw nothing here.
  const double mode_norm = spec.mode_spread * std::sqrt(d);
  std::vector<std::vector<double>> mode_offsets(
      static_cast<std::size_t>(spec.n_identities) * spec.modes,
      std::vector<double>(d, 0.0));
  for (int id = 0; id < spec.n_identities; ++id) {
    for (int m = 1; m < spec.modes; ++m) {
      auto& off = mode_offsets[static_cast<std::size_t>(id) * spec.modes + m];
      while (true) {
        for (double& x : off) x = rng.gaussian();
        const double n2 = squared_norm(off);
        if (n2 > 1e-12) {
          const double scale = mode_norm / std::sqrt(n2);
          for (double& x : off) x *= scale;
          break;
        }
      }
    }
  }

  // Domain transform parameters are drawn even when unused so the stream
  // layout does not depend on which knobs are active.
  std::vector<double> offset(d);
  for (double& x : offset) x = rng.gaussian();
  {
    const double n = std::sqrt(squared_norm(offset));
    const double scale = n > 0.0 ? spec.shift / n : 0.0;
    for (double& x : offset) x *= scale;
  }
  std::vector<double> mix(static_cast<std::size_t>(d) * d);
  for (double& x : mix) x = rng.gaussian() / std::sqrt(static_cast<double>(d));

  RawDataset out;
  out.domain = domain;
  for (int id = 0; id < spec.n_identities; ++id) {
    for (int s = 0; s < spec.samples_per_identity; ++s) {
      const auto& mode =
          mode_offsets[static_cast<std::size_t>(id) * spec.modes +
                       s % spec.modes];
      std::vector<double> x(d);
      for (int i = 0; i < d; ++i) {
        x[i] = centers[id][i] + mode[i] + spec.noise_sigma * rng.gaussian();
      }
      if (spec.distortion != 0.0) {
        std::vector<double> y(d);
        for (int r = 0; r < d; ++r) {
          double acc = x[r];
          const double* row = mix.data() + static_cast<std::size_t>(r) * d;
          for (int c = 0; c < d; ++c) acc += spec.distortion * row[c] * x[c];
          y[r] = acc;
        }
        x = std::move(y);
      }
      for (int i = 0; i < d; ++i) x[i] += offset[i];
      out.inputs.push_back(std::move(x));
      out.true_ids.push_back(id);
    }
  }
  return out;
}

}  // namespace

std::pair<RawDataset, RawDataset> generate_domains(const DomainSpec& source,
                                                   const DomainSpec& target,
                                                   Rng& rng) {
  if (source.input_dim != target.input_dim) {
    throw std::invalid_argument("generate_domains: input dims must match");
  }
  RawDataset s = generate_one(source, Domain::Source, rng);
  RawDataset t = generate_one(target, Domain::Target, rng);
  return {std::move(s), std::move(t)};
}

std::vector<double> augment(const std::vector<double>& x, double sigma,
                            Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("augment: negative sigma");
  if (sigma == 0.0) return x;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] + sigma * rng.gaussian();
  }
  return out;
}

std::vector<QueryRef> pk_sample(const PseudoDataset& dataset, int p, int k,
                                Rng& rng) {
  if (p < 1 || k < 1) throw std::invalid_argument("pk_sample: p, k must be >= 1");
  if (dataset.n_classes < p) {
    throw std::invalid_argument(
        "pk_sample: dataset has fewer than p classes (" +
        std::to_string(dataset.n_classes) + " < " + std::to_string(p) + ")");
  }
  const auto members = dataset.members_by_class();

  std::vector<int> classes(dataset.n_classes);
  for (int i = 0; i < dataset.n_classes; ++i) classes[i] = i;
  for (int i = 0; i < p; ++i) {
    const int j = i + rng.uniform_int(dataset.n_classes - i);
    std::swap(classes[i], classes[j]);
  }

  std::vector<QueryRef> out;
  out.reserve(static_cast<std::size_t>(p) * k);
  for (int ci = 0; ci < p; ++ci) {
    const int cls = classes[ci];
    const auto& m = members[cls];
    const int n = static_cast<int>(m.size());
    if (n >= k) {
      std::vector<int> pick(m);
      for (int i = 0; i < k; ++i) {
        const int j = i + rng.uniform_int(n - i);
        std::swap(pick[i], pick[j]);
      }
      for (int i = 0; i < k; ++i) {
        out.push_back({dataset.sample_index[pick[i]], cls});
      }
    } else {
      // Tiny class: sample with replacement to keep the group size at k.
      for (int i = 0; i < k; ++i) {
        const int pos = m[rng.uniform_int(n)];
        out.push_back({dataset.sample_index[pos], cls});
      }
    }
  }
  return out;
}

void export_flat_text(const std::string& path, const RawDataset& source,
                      const RawDataset& target) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export: cannot open " + path);
  for (const RawDataset* ds : {&source, &target}) {
    for (std::size_t i = 0; i < ds->size(); ++i) {
      out << domain_name(ds->domain) << ',' << ds->true_ids[i];
      for (double v : ds->inputs[i]) out << ',' << fmt_double(v);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("export: write failure on " + path);
}

std::pair<RawDataset, RawDataset> import_flat_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import: cannot open " + path);
  RawDataset source;
  source.domain = Domain::Source;
  RawDataset target;
  target.domain = Domain::Target;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tok;
    if (!std::getline(fields, tok, ',')) continue;
    RawDataset* ds = nullptr;
    if (tok == "source") {
      ds = &source;
    } else if (tok == "target") {
      ds = &target;
    } else {
      throw std::runtime_error("import: bad domain at line " +
                               std::to_string(line_no));
    }
    if (!std::getline(fields, tok, ',')) {
      throw std::runtime_error("import: missing id at line " +
                               std::to_string(line_no));
    }
    const int id = std::stoi(tok);
    std::vector<double> x;
    while (std::getline(fields, tok, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc()) {
        throw std::runtime_error("import: bad number at line " +
                                 std::to_string(line_no));
      }
      x.push_back(v);
    }
    if (x.empty()) {
      throw std::runtime_error("import: empty sample at line " +
                               std::to_string(line_no));
    }
    ds->inputs.push_back(std::move(x));
    ds->true_ids.push_back(id);
  }
  if (source.size() == 0 || target.size() == 0) {
    throw std::runtime_error("import: need samples in both domains");
  }
  return {std::move(source), std::move(target)};
}

}  // namespace mcrn
