#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sonarssl/scene.hpp"
#include "sonarssl/snippet.hpp"

namespace sonarssl {

enum class SplitTag : std::uint8_t { pretrain = 0, train = 1, validation = 2, test = 3 };

const char* split_tag_name(SplitTag tag);

struct DatasetMetadata {
  std::size_t snippet_size = 0;
  std::size_t band_count = Snippet::kBands;
  std::uint64_t creation_seed = 0;
};

// An ordered snippet corpus for one split. Labeled splits (train/validation/
// test) must be fully labeled and hold exactly as many positives as
// negatives; the pretrain split carries no such constraint.
struct SnippetDataset {
  std::vector<Snippet> snippets;
  SplitTag split_tag = SplitTag::pretrain;
  DatasetMetadata metadata;

  std::size_t size() const { return snippets.size(); }

  // Throws InputError on shape inconsistencies, BalanceError when a labeled
  // split is unbalanced or contains unlabeled snippets.
  void validate() const;
};

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;

  void validate() const;  // nonnegative, sum to 1 within 1e-9
};

struct Splits {
  SnippetDataset pretrain, train, validation, test;
};

// Pretrain = all unlabeled snippets with labels stripped. The labeled pool is
// shuffled by seed, split per class at round-half-up ratio boundaries, and
// each labeled split is truncated to its minority-class count so positives =
// negatives. Deterministic in (inputs, seed).
Splits build_splits(const std::vector<std::pair<Snippet, std::uint8_t>>& labeled,
                    const std::vector<Snippet>& unlabeled, const SplitRatios& ratios,
                    std::uint64_t seed);

// Keeps round-half-up(fraction * n/2) snippets per class, chosen uniformly at
// random (seeded), in original dataset order. fraction = 1 is the identity.
// Throws InsufficientLabelsError when the per-class count rounds to zero.
SnippetDataset subsample_labels(const SnippetDataset& dataset, double fraction,
                                std::uint64_t seed);

// Deterministic distributed-sampler contract: permute by epoch_seed, then
// take permuted positions congruent to shard_id mod num_shards.
struct ShardSpec {
  std::size_t num_shards = 1;
  std::size_t shard_id = 0;
  std::uint64_t epoch_seed = 0;

  void validate() const;
};

// The index sequence a shard visits: positions of the epoch_seed permutation
// of [0,n) congruent to shard_id mod num_shards. shard() materializes it.
std::vector<std::size_t> shard_indices(std::size_t n, const ShardSpec& spec);

// Shards partition the permuted dataset: disjoint, covering, sizes within 1.
// A shard of a balanced split need not itself be balanced.
SnippetDataset shard(const SnippetDataset& dataset, const ShardSpec& spec);

// SSBN1 container (little-endian): magic "SSBN1", content-kind byte, header
// with counts/shape/dtype, float32 payload, label block (255 = unlabeled),
// provenance block, metadata text block. Round-trips are bit-exact.
void save_dataset(const SnippetDataset& dataset, const std::string& path);
SnippetDataset load_dataset(const std::string& path);

// Scene corpora share the container (content kind 1). Band rasters are
// float32-quantized on save, so save/load/save is stable.
void save_scenes(const std::vector<Scene>& scenes, const std::string& path,
                 std::uint64_t creation_seed);
std::vector<Scene> load_scenes(const std::string& path, std::uint64_t* creation_seed = nullptr);

}  // namespace sonarssl
