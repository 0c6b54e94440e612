#include "taildep/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <utility>

#include "json.hpp"
#include "taildep/parallel.hpp"
#include "taildep/tensor_io.hpp"

namespace taildep {

namespace {

using nlohmann::json;

const Family kAdFamilies[4] = {Family::Smith, Family::Schlather, Family::BrownResnick,
                               Family::ExtremalT};
const Family kInvFamilies[4] = {Family::InvSmith, Family::InvSchlather,
                                Family::InvBrownResnick, Family::InvExtremalT};
const Family kAiFamilies[5] = {Family::InvSmith, Family::InvSchlather,
                               Family::InvBrownResnick, Family::InvExtremalT,
                               Family::ExtremeGaussian};

void append_block(std::vector<Family>& out, const Family* fams, std::size_t nfam,
                  std::size_t count) {
  for (std::size_t k = 0; k < nfam; ++k) {
    const std::size_t c = count / nfam + (k < count % nfam ? 1 : 0);
    out.insert(out.end(), c, fams[k]);
  }
}

void check_grid(const std::vector<double>& grid, double lo, double hi,
                const char* what) {
  if (grid.empty()) throw ConfigError(std::string(what) + " grid is empty");
  for (double v : grid)
    if (!(v >= lo) || !(v <= hi))
      throw ConfigError(std::string(what) + " grid value " + std::to_string(v) +
                        " is outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
}

// Parameters for the dataset at position j of its family block. Grid designs
// sweep the Cartesian grid in row order; random designs draw from the stream.
// Mixture components share sigma/delta and differ only in family.
ProcessSpec make_process(const ScenarioSpec& spec, Family fam, std::size_t j,
                         rng::Philox g) {
  ProcessSpec p;
  p.family = fam;
  double sigma = 0.0, delta = 0.0;
  if (fam == Family::MaxMixture) {
    if (spec.grid_params()) {
      const std::size_t nd = spec.delta_grid.size();
      const std::size_t na = spec.a_grid.size();
      const std::size_t cell = j % (spec.sigma_grid.size() * nd * na);
      sigma = spec.sigma_grid[cell / (nd * na)];
      delta = spec.delta_grid[(cell / na) % nd];
      p.a = spec.a_grid[cell % na];
    } else {
      sigma = g.uniform(spec.sigma_lo, spec.sigma_hi);
      delta = g.uniform(spec.delta_lo, spec.delta_hi);
      p.a = g.uniform(spec.a_lo, spec.a_hi);
    }
    auto ad = std::make_shared<ProcessSpec>();
    ad->family = kAdFamilies[g.below(4)];
    ad->params = CorrelationModel{sigma, delta};
    auto ai = std::make_shared<ProcessSpec>();
    ai->family = kAiFamilies[g.below(5)];
    ai->params = CorrelationModel{sigma, delta};
    p.ad_component = std::move(ad);
    p.ai_component = std::move(ai);
  } else {
    if (spec.grid_params()) {
      const std::size_t nd = spec.delta_grid.size();
      const std::size_t cell = j % (spec.sigma_grid.size() * nd);
      sigma = spec.sigma_grid[cell / nd];
      delta = spec.delta_grid[cell % nd];
    } else {
      sigma = g.uniform(spec.sigma_lo, spec.sigma_hi);
      delta = g.uniform(spec.delta_lo, spec.delta_hi);
    }
  }
  p.params = CorrelationModel{sigma, delta};
  return p;
}

struct GeneratedSet {
  std::vector<DatasetRecord> records;
  std::vector<DependenceTensor> tensors;
};

// The deterministic core: every dataset i derives its site, parameter, and
// simulation streams from (base, i) alone, so the worker count cannot change
// any byte of the result.
GeneratedSet generate_set(const ScenarioSpec& spec, rng::Philox base,
                          bool per_dataset_sites, const SiteSet* shared_sites,
                          int threads) {
  const std::vector<Family> fams = corpus_composition(spec);
  const std::size_t n = fams.size();
  std::vector<std::size_t> local(n, 0);
  {
    std::size_t counts[16] = {};
    for (std::size_t i = 0; i < n; ++i)
      local[i] = counts[static_cast<std::size_t>(fams[i])]++;
  }

  std::optional<SiteSet> design;
  if (!per_dataset_sites)
    design.emplace(shared_sites != nullptr
                       ? *shared_sites
                       : SiteSet::random(spec.d, base.child(rng::domain::kSites)));

  GeneratedSet out;
  out.records.resize(n);
  out.tensors.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const SiteSet sites =
        per_dataset_sites
            ? SiteSet::random(spec.d, base.child(rng::domain::kSites).child(i))
            : *design;
    const ProcessSpec proc = make_process(
        spec, fams[i], local[i], base.child(rng::domain::kParams).child(i));
    const FieldSample fs =
        simulate(proc, sites, spec.n_reps, base.child(rng::domain::kDatasets).child(i));
    const Matrix scores = uniform_scores(fs.values);

    DatasetRecord& r = out.records[i];
    r.index = i;
    r.process = proc;
    r.label = proc.label();
    r.site_hash = sites.hash();
    r.offset = i * tensor_byte_size(spec.d);
    r.approximate = fs.approximate();
    out.tensors[i] = dependence_tensor(scores, spec.u);
  });
  return out;
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_from_hex(const std::string& s) {
  if (s.size() != 18 || s[0] != '0' || s[1] != 'x')
    throw IoError("manifest has a malformed site hash: " + s);
  return std::stoull(s.substr(2), nullptr, 16);
}

json process_to_json(const ProcessSpec& p) {
  json e;
  e["family"] = family_name(p.family);
  e["sigma"] = p.params.sigma;
  e["delta"] = p.params.delta;
  if (p.family == Family::MaxMixture) {
    e["a"] = p.a;
    e["components"] = {{"ad", process_to_json(*p.ad_component)},
                       {"ai", process_to_json(*p.ai_component)}};
  }
  return e;
}

ProcessSpec process_from_json(const json& e) {
  ProcessSpec p;
  p.family = family_from_name(e.at("family").get<std::string>());
  p.params.sigma = e.at("sigma").get<double>();
  p.params.delta = e.at("delta").get<double>();
  if (p.family == Family::MaxMixture) {
    p.a = e.at("a").get<double>();
    const json& comps = e.at("components");
    p.ad_component = std::make_shared<ProcessSpec>(process_from_json(comps.at("ad")));
    p.ai_component = std::make_shared<ProcessSpec>(process_from_json(comps.at("ai")));
  }
  return p;
}

DependenceClass label_from_string(const std::string& s) {
  if (s == "AD") return DependenceClass::AD;
  if (s == "AI") return DependenceClass::AI;
  if (s == "MIX") return DependenceClass::MIX;
  throw IoError("manifest names an unknown class label: " + s);
}

// true when a finished corpus matching (spec, seed) is already on disk
bool corpus_is_current(const ScenarioSpec& spec, std::uint64_t seed,
                       const std::string& dir, CorpusManifest* out) {
  namespace fs = std::filesystem;
  const fs::path mpath = fs::path(dir) / "manifest.json";
  const fs::path bpath = fs::path(dir) / "tensors.bin";
  std::error_code ec;
  if (!fs::exists(mpath, ec) || !fs::exists(bpath, ec)) return false;
  CorpusManifest m;
  try {
    m = load_manifest(mpath.string());
  } catch (const std::exception&) {
    return false;
  }
  if (!(m.design == spec) || m.seed != seed ||
      m.records.size() != spec.n_datasets || m.split.size() != m.records.size())
    return false;
  const auto size = fs::file_size(bpath, ec);
  if (ec || size != spec.n_datasets * tensor_byte_size(spec.d)) return false;
  if (out != nullptr) *out = std::move(m);
  return true;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (id < 1 || id > 3)
    throw ConfigError("scenario must be 1, 2, or 3; got " + std::to_string(id));
  if (d < 2) throw ConfigError("a corpus needs at least 2 stations per dataset");
  if (n_reps < 2) throw ConfigError("a corpus needs at least 2 replications per dataset");
  const std::size_t min_n = three_class ? 3 : 2;
  if (n_datasets < min_n)
    throw ConfigError("dataset count must cover every class at least once");
  if (!(u > 0.0) || !(u < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (!(sigma_lo >= 0.0) || !(sigma_lo < sigma_hi) || sigma_hi > 1e6)
    throw ConfigError("scale range is invalid");
  if (!(delta_lo > 0.0) || !(delta_lo < delta_hi) || delta_hi > 2.0)
    throw ConfigError("smoothness range must satisfy 0 < lo < hi <= 2");
  if (!(a_lo >= 0.0) || !(a_lo < a_hi) || a_hi > 1.0)
    throw ConfigError("mixing range must satisfy 0 <= lo < hi <= 1");
  if (grid_params()) {
    check_grid(sigma_grid, 1e-12, 1e6, "scale");
    check_grid(delta_grid, 1e-12, 2.0, "smoothness");
    check_grid(a_grid, 0.0, 1.0, "mixing");
  }
}

std::vector<Family> corpus_composition(const ScenarioSpec& spec) {
  const std::size_t n = spec.n_datasets;
  std::size_t n_ad = 0, n_ai = 0, n_mix = 0;
  if (spec.three_class) {
    const std::size_t base = n / 3, rem = n % 3;
    n_ad = base + (rem > 0 ? 1 : 0);
    n_ai = base + (rem > 1 ? 1 : 0);
    n_mix = base;
  } else {
    n_ad = (n + 1) / 2;
    n_ai = n / 2;
  }
  // 70% of the AI pool is inverted max-stable, the rest extreme-Gaussian
  const std::size_t n_inv = (n_ai * 7 + 5) / 10;
  std::vector<Family> out;
  out.reserve(n);
  append_block(out, kAdFamilies, 4, n_ad);
  append_block(out, kInvFamilies, 4, n_inv);
  out.insert(out.end(), n_ai - n_inv, Family::ExtremeGaussian);
  out.insert(out.end(), n_mix, Family::MaxMixture);
  return out;
}

std::vector<SplitPart> split_corpus(const CorpusManifest& manifest, std::uint64_t seed) {
  std::vector<SplitPart> out(manifest.records.size(), SplitPart::Training);
  for (DependenceClass cls :
       {DependenceClass::AD, DependenceClass::AI, DependenceClass::MIX}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      if (manifest.records[i].label == cls) idx.push_back(i);
    if (idx.empty()) continue;
    rng::Philox g =
        rng::Philox(seed).child(rng::domain::kSplit).child(class_index(cls));
    for (std::size_t i = idx.size(); i-- > 1;) {
      const std::size_t j = g.below(i + 1);
      std::swap(idx[i], idx[j]);
    }
    const std::size_t n = idx.size();
    const std::size_t n_val = n * 16 / 100;
    const std::size_t n_test = n * 20 / 100;
    const std::size_t n_train = n - n_val - n_test;  // floor remainders train
    for (std::size_t k = 0; k < n; ++k) {
      SplitPart part = SplitPart::Training;
      if (k >= n_train) part = k < n_train + n_val ? SplitPart::Validation
                                                   : SplitPart::Testing;
      out[idx[k]] = part;
    }
  }
  return out;
}

std::string manifest_to_json(const CorpusManifest& m) {
  json j;
  j["format"] = "taildep-corpus/1";
  j["scenario"] = m.scenario;
  j["seed"] = m.seed;
  j["sites"] = m.d;
  j["replications"] = m.n_reps;
  j["threshold"] = m.u;
  j["classes"] = m.classes;
  j["tensor_bytes"] = tensor_byte_size(m.d);
  {
    json dz;
    dz["datasets"] = m.design.n_datasets;
    dz["sigma_range"] = {m.design.sigma_lo, m.design.sigma_hi};
    dz["delta_range"] = {m.design.delta_lo, m.design.delta_hi};
    dz["a_range"] = {m.design.a_lo, m.design.a_hi};
    dz["sigma_grid"] = m.design.sigma_grid;
    dz["delta_grid"] = m.design.delta_grid;
    dz["a_grid"] = m.design.a_grid;
    j["design"] = std::move(dz);
  }
  json recs = json::array();
  for (const DatasetRecord& r : m.records) {
    json e = process_to_json(r.process);
    e["index"] = r.index;
    e["label"] = to_string(r.label);
    e["site_hash"] = hash_hex(r.site_hash);
    e["offset"] = r.offset;
    e["approximate"] = r.approximate;
    recs.push_back(std::move(e));
  }
  j["records"] = std::move(recs);
  if (!m.split.empty()) {
    json sp;
    sp["training"] = json::array();
    sp["validation"] = json::array();
    sp["testing"] = json::array();
    for (std::size_t i = 0; i < m.split.size(); ++i) {
      switch (m.split[i]) {
        case SplitPart::Training: sp["training"].push_back(i); break;
        case SplitPart::Validation: sp["validation"].push_back(i); break;
        case SplitPart::Testing: sp["testing"].push_back(i); break;
      }
    }
    j["split"] = std::move(sp);
  }
  return j.dump(2) + "\n";
}

CorpusManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "taildep-corpus/1")
      throw IoError("unsupported manifest format tag");
    CorpusManifest m;
    m.scenario = j.at("scenario").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.d = j.at("sites").get<std::size_t>();
    m.n_reps = j.at("replications").get<std::size_t>();
    m.u = j.at("threshold").get<double>();
    m.classes = j.at("classes").get<std::size_t>();
    {
      const json& dz = j.at("design");
      ScenarioSpec& s = m.design;
      s.id = m.scenario;
      s.d = m.d;
      s.n_reps = m.n_reps;
      s.u = m.u;
      s.three_class = m.classes == 3;
      s.n_datasets = dz.at("datasets").get<std::size_t>();
      s.sigma_lo = dz.at("sigma_range").at(0).get<double>();
      s.sigma_hi = dz.at("sigma_range").at(1).get<double>();
      s.delta_lo = dz.at("delta_range").at(0).get<double>();
      s.delta_hi = dz.at("delta_range").at(1).get<double>();
      s.a_lo = dz.at("a_range").at(0).get<double>();
      s.a_hi = dz.at("a_range").at(1).get<double>();
      s.sigma_grid = dz.at("sigma_grid").get<std::vector<double>>();
      s.delta_grid = dz.at("delta_grid").get<std::vector<double>>();
      s.a_grid = dz.at("a_grid").get<std::vector<double>>();
    }
    for (const json& e : j.at("records")) {
      DatasetRecord r;
      r.process = process_from_json(e);
      r.index = e.at("index").get<std::size_t>();
      r.label = label_from_string(e.at("label").get<std::string>());
      r.site_hash = hash_from_hex(e.at("site_hash").get<std::string>());
      r.offset = e.at("offset").get<std::uint64_t>();
      r.approximate = e.at("approximate").get<bool>();
      m.records.push_back(std::move(r));
    }
    if (j.contains("split")) {
      m.split.assign(m.records.size(), SplitPart::Training);
      std::vector<bool> seen(m.records.size(), false);
      const json& sp = j.at("split");
      const std::pair<const char*, SplitPart> parts[3] = {
          {"training", SplitPart::Training},
          {"validation", SplitPart::Validation},
          {"testing", SplitPart::Testing}};
      for (const auto& [key, part] : parts) {
        for (const json& v : sp.at(key)) {
          const std::size_t i = v.get<std::size_t>();
          if (i >= m.records.size() || seen[i])
            throw IoError("manifest split is not a partition of the records");
          seen[i] = true;
          m.split[i] = part;
        }
      }
      if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
        throw IoError("manifest split is not a partition of the records");
    }
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest is missing fields: ") + e.what());
  }
}

void save_manifest(const std::string& path, const CorpusManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string text = manifest_to_json(m);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path);
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

CorpusManifest generate_corpus(const ScenarioSpec& spec, std::uint64_t seed,
                               const std::string& out_dir, int threads) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  CorpusManifest existing;
  if (corpus_is_current(spec, seed, out_dir, &existing)) return existing;

  GeneratedSet set =
      generate_set(spec, rng::Philox(seed), spec.random_sites(), nullptr, threads);

  const std::string bin_path = (fs::path(out_dir) / "tensors.bin").string();
  {
    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot open " + bin_path + " for writing");
    for (std::size_t i = 0; i < set.tensors.size(); ++i) {
      const std::vector<unsigned char> bytes = tensor_to_bytes(set.tensors[i]);
      bin.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    }
    if (!bin) throw IoError("failed writing " + bin_path);
  }

  CorpusManifest m;
  m.scenario = spec.id;
  m.seed = seed;
  m.d = spec.d;
  m.n_reps = spec.n_reps;
  m.u = spec.u;
  m.classes = spec.three_class ? 3 : 2;
  m.design = spec;
  m.records = std::move(set.records);
  m.split = split_corpus(m, seed);
  // written last: its presence marks the corpus as complete
  save_manifest((fs::path(out_dir) / "manifest.json").string(), m);
  return m;
}

LoadedCorpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedCorpus c;
  c.manifest = load_manifest((fs::path(dir) / "manifest.json").string());
  const std::string bin_path = (fs::path(dir) / "tensors.bin").string();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)),
                                   std::istreambuf_iterator<char>());
  const std::size_t rec = tensor_byte_size(c.manifest.d);
  c.tensors.reserve(c.manifest.records.size());
  for (const DatasetRecord& r : c.manifest.records) {
    if (r.offset + rec > bytes.size())
      throw IoError("tensors.bin is shorter than the manifest expects");
    c.tensors.push_back(tensor_from_bytes(bytes.data() + r.offset, rec));
  }
  return c;
}

LabeledSet corpus_part(const LoadedCorpus& c, SplitPart part) {
  if (c.manifest.split.size() != c.manifest.records.size())
    throw ConfigError("corpus has no split assignment");
  LabeledSet out;
  for (std::size_t i = 0; i < c.manifest.records.size(); ++i) {
    if (c.manifest.split[i] != part) continue;
    out.xs.push_back(tensor3_from_dependence(c.tensors[i]));
    out.ys.push_back(class_index(c.manifest.records[i].label));
  }
  return out;
}

GroupEval evaluate_model(const NetworkState& net, const std::vector<Tensor3>& xs,
                         const std::vector<std::size_t>& ys, double l2, int threads) {
  if (xs.size() != ys.size()) throw ConfigError("sample and label counts disagree");
  if (xs.empty()) throw ConfigError("evaluation group is empty");
  std::vector<double> ce(xs.size(), 0.0);
  std::vector<unsigned char> ok(xs.size(), 0);
  parallel_for(xs.size(), threads, [&](std::size_t i) {
    const auto [k, p] = predict_probs(net, xs[i]);
    ce[i] = cross_entropy(p, ys[i]);
    ok[i] = k == ys[i] ? 1 : 0;
  });
  GroupEval ev;
  ev.n = xs.size();
  std::size_t correct = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += ce[i];
    correct += ok[i];
  }
  ev.loss = sum / static_cast<double>(xs.size()) + l2_penalty(net, l2);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(xs.size());
  return ev;
}

std::vector<EvalGroup> generate_eval_groups(const ScenarioSpec& spec, std::uint64_t seed,
                                            std::size_t n_per_group, int threads) {
  spec.validate();
  if (n_per_group == 0) throw ConfigError("evaluation groups need at least one dataset");

  ScenarioSpec gs = spec;
  gs.n_datasets = n_per_group;

  // the corpus' fixed design, for the groups that only perturb parameters
  std::optional<SiteSet> design;
  if (!spec.random_sites())
    design.emplace(SiteSet::random(spec.d, rng::Philox(seed).child(rng::domain::kSites)));

  auto to_set = [](GeneratedSet&& g) {
    LabeledSet s;
    for (std::size_t i = 0; i < g.records.size(); ++i) {
      s.xs.push_back(tensor3_from_dependence(g.tensors[i]));
      s.ys.push_back(class_index(g.records[i].label));
    }
    return s;
  };

  std::vector<EvalGroup> out;
  const rng::Philox eval_base = rng::Philox(seed).child(rng::domain::kEval);
  {
    EvalGroup g;
    g.name = "different-locations";
    g.data = to_set(generate_set(gs, eval_base.child(0), true, nullptr, threads));
    out.push_back(std::move(g));
  }
  {
    ScenarioSpec off = gs;  // scale values between the training grid points
    off.id = 3;
    off.sigma_grid = {0.2, 0.4, 0.6, 0.8};
    EvalGroup g;
    g.name = "different-scale";
    g.data = to_set(generate_set(off, eval_base.child(1), spec.random_sites(),
                                 spec.random_sites() ? nullptr : &*design, threads));
    out.push_back(std::move(g));
  }
  {
    ScenarioSpec off = gs;  // smoothness values between the training grid points
    off.id = 3;
    off.delta_grid = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8};
    EvalGroup g;
    g.name = "different-smooth";
    g.data = to_set(generate_set(off, eval_base.child(2), spec.random_sites(),
                                 spec.random_sites() ? nullptr : &*design, threads));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace taildep
