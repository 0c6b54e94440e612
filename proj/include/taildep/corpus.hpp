#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taildep/extremes.hpp"
#include "taildep/network.hpp"
#include "taildep/rng.hpp"
#include "taildep/simulation.hpp"
#include "taildep/sites.hpp"

namespace taildep {

// A corpus design. Three layouts:
//   1 - fresh random sites for every dataset, random parameters
//   2 - one fixed random site design, random parameters
//   3 - one fixed random site design, parameters swept over a regular grid
struct ScenarioSpec {
  int id = 1;
  std::size_t d = 15;            // stations per dataset
  std::size_t n_datasets = 100;  // total datasets across all classes
  std::size_t n_reps = 1000;     // temporal replications per dataset
  double u = kDefaultThreshold;
  bool three_class = false;      // adds max-mixture datasets as a third class

  // random parameter policy (scenarios 1 and 2)
  double sigma_lo = 0.0, sigma_hi = 1.0;
  double delta_lo = 0.1, delta_hi = 1.9;
  double a_lo = 0.0, a_hi = 1.0;

  // grid parameter policy (scenario 3); swept per family in record order
  std::vector<double> sigma_grid = {0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  std::vector<double> delta_grid = {0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9};
  std::vector<double> a_grid = {0.3, 0.4, 0.5, 0.6, 0.7};

  void validate() const;
  bool random_sites() const { return id == 1; }
  bool grid_params() const { return id == 3; }
  bool operator==(const ScenarioSpec&) const = default;
};

struct DatasetRecord {
  std::size_t index = 0;
  ProcessSpec process;
  DependenceClass label = DependenceClass::AD;
  std::uint64_t site_hash = 0;
  std::uint64_t offset = 0;       // byte offset of the tensor in tensors.bin
  bool approximate = false;       // the storm budget was exhausted somewhere
};

enum class SplitPart : int { Training = 0, Validation = 1, Testing = 2 };

struct CorpusManifest {
  int scenario = 1;
  std::uint64_t seed = 0;
  std::size_t d = 0;
  std::size_t n_reps = 0;
  double u = kDefaultThreshold;
  std::size_t classes = 2;
  ScenarioSpec design;  // the full generating design, for held-out probes
  std::vector<DatasetRecord> records;
  std::vector<SplitPart> split;  // aligned with records; empty before splitting
};

// Family sequence of a corpus: the AD block walks the four max-stable
// families with equal counts (remainder spread from the front), the AI block
// is 70% inverted families / 30% extreme-Gaussian, and three-class designs
// append max-mixtures. Deterministic in the spec alone.
std::vector<Family> corpus_composition(const ScenarioSpec& spec);

// Generates every dataset, writes tensors.bin + manifest.json under out_dir,
// and returns the split manifest. A completed corpus that already matches
// (spec, seed) on disk is left untouched and loaded instead; the manifest is
// only written after all tensors land, so an interrupted run restarts cleanly.
CorpusManifest generate_corpus(const ScenarioSpec& spec, std::uint64_t seed,
                               const std::string& out_dir, int threads);

// Stratified 64/16/20 split (floor per class, remainders to training), a pure
// function of (manifest labels, seed).
std::vector<SplitPart> split_corpus(const CorpusManifest& manifest, std::uint64_t seed);

std::string manifest_to_json(const CorpusManifest& m);
CorpusManifest manifest_from_json(const std::string& text);
void save_manifest(const std::string& path, const CorpusManifest& m);
CorpusManifest load_manifest(const std::string& path);

struct LoadedCorpus {
  CorpusManifest manifest;
  std::vector<DependenceTensor> tensors;  // aligned with manifest.records
};
LoadedCorpus load_corpus(const std::string& dir);

struct LabeledSet {
  std::vector<Tensor3> xs;
  std::vector<std::size_t> ys;
};

LabeledSet corpus_part(const LoadedCorpus& c, SplitPart part);

struct GroupEval {
  double loss = 0.0;      // mean cross-entropy plus one l2 penalty term
  double accuracy = 0.0;  // argmax accuracy
  std::size_t n = 0;
};

GroupEval evaluate_model(const NetworkState& net, const std::vector<Tensor3>& xs,
                         const std::vector<std::size_t>& ys, double l2, int threads);

struct EvalGroup {
  std::string name;
  LabeledSet data;
};

// Held-out probes never seen in training: fresh site designs, then scale and
// smoothness values at grid midpoints. Same class composition as the corpus.
std::vector<EvalGroup> generate_eval_groups(const ScenarioSpec& spec, std::uint64_t seed,
                                            std::size_t n_per_group, int threads);

}  // namespace taildep
