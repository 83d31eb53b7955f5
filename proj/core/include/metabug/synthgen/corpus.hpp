#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "metabug/synthgen/generator.hpp"

namespace metabug::synthgen {

/// A malformed or unreadable corpus file; the message names the path.
class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Corpus {
  std::vector<InconsistencyGroup> groups;
};

/// `groups_per_kind` groups for each kind; group g of the i-th listed kind is
/// seeded with derive_seed(seed, 1000 * i + g).
Corpus generate_corpus(const std::vector<GroupKind>& kinds, std::uint64_t seed, int groups_per_kind,
                       int n_buggy, int ratio, double noise = kDefaultNoise);

std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const std::string& text);

/// Writes `<dir>/<kind>/<group-id>/{buggy|correct}/<n>.mbl`, a `<n>.truth.json`
/// beside each buggy program, and a `group.json` per group.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Reads a corpus written by write_corpus, groups ordered by kind then id.
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace metabug::synthgen
