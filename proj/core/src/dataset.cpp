#include "sonarssl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sonarssl/binary_io.hpp"
#include "sonarssl/rng.hpp"

namespace sonarssl {

namespace {

constexpr std::uint8_t kUnlabeled = 255;

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

}  // namespace

const char* split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::pretrain: return "pretrain";
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
  }
  return "?";
}

void SnippetDataset::validate() const {
  if (metadata.band_count != Snippet::kBands)
    throw InputError("dataset: band count must be 2");
  std::size_t n_pos = 0, n_neg = 0;
  for (const Snippet& s : snippets) {
    s.validate();
    if (s.size != metadata.snippet_size)
      throw InputError("dataset: snippet shape differs from metadata");
    if (s.label) {
      if (*s.label > 1) throw InputError("dataset: labels must be 0 or 1");
      (*s.label ? n_pos : n_neg) += 1;
    } else if (split_tag != SplitTag::pretrain) {
      throw InputError(std::string("dataset: unlabeled snippet in split ") +
                       split_tag_name(split_tag));
    }
  }
  if (split_tag != SplitTag::pretrain && n_pos != n_neg)
    throw BalanceError(std::string("dataset: split ") + split_tag_name(split_tag) +
                       " is unbalanced (" + std::to_string(n_pos) + " positive vs " +
                       std::to_string(n_neg) + " negative)");
}

void SplitRatios::validate() const {
  if (train < 0.0 || validation < 0.0 || test < 0.0)
    throw ConfigError("split ratios must be nonnegative");
  if (std::abs(train + validation + test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
}

Splits build_splits(const std::vector<std::pair<Snippet, std::uint8_t>>& labeled,
                    const std::vector<Snippet>& unlabeled, const SplitRatios& ratios,
                    std::uint64_t seed) {
  ratios.validate();
  for (const auto& [snippet, label] : labeled) {
    if (label > 1) throw InputError("build_splits: labels must be 0 or 1");
    (void)snippet;
  }
  const auto class_count = [&](std::uint8_t cls) {
    return static_cast<std::size_t>(
        std::count_if(labeled.begin(), labeled.end(),
                      [cls](const auto& p) { return p.second == cls; }));
  };
  if (!labeled.empty()) {
    if (class_count(1) == 0) throw BalanceError("build_splits: labeled pool has no positives");
    if (class_count(0) == 0) throw BalanceError("build_splits: labeled pool has no negatives");
  }

  std::size_t snippet_size = 0;
  if (!unlabeled.empty())
    snippet_size = unlabeled.front().size;
  else if (!labeled.empty())
    snippet_size = labeled.front().first.size;
  for (const Snippet& s : unlabeled)
    if (s.size != snippet_size) throw InputError("build_splits: snippet shapes differ");
  for (const auto& p : labeled)
    if (p.first.size != snippet_size) throw InputError("build_splits: snippet shapes differ");

  DatasetMetadata meta;
  meta.snippet_size = snippet_size;
  meta.creation_seed = seed;

  Splits out;
  out.pretrain.split_tag = SplitTag::pretrain;
  out.train.split_tag = SplitTag::train;
  out.validation.split_tag = SplitTag::validation;
  out.test.split_tag = SplitTag::test;
  out.pretrain.metadata = out.train.metadata = out.validation.metadata = out.test.metadata = meta;

  out.pretrain.snippets = unlabeled;
  for (Snippet& s : out.pretrain.snippets) s.label.reset();

  // Shuffle the pool, collect per-class index lists in shuffled order, cut
  // each at round-half-up ratio boundaries, then truncate every split to its
  // minority class so the 50/50 invariant holds exactly.
  std::vector<std::size_t> order(labeled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0));
  fisher_yates(order, rng);

  std::vector<std::size_t> by_class[2];
  for (std::size_t pos : order) by_class[labeled[pos].second].push_back(pos);

  std::vector<std::size_t> members[3][2];  // [train, validation, test] x class
  for (int cls = 0; cls < 2; ++cls) {
    const auto& idx = by_class[cls];
    const auto n = static_cast<double>(idx.size());
    const std::size_t b1 = round_half_up(n * ratios.train);
    const std::size_t b2 = round_half_up(n * (ratios.train + ratios.validation));
    members[0][cls].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(b1));
    members[1][cls].assign(idx.begin() + static_cast<std::ptrdiff_t>(b1),
                           idx.begin() + static_cast<std::ptrdiff_t>(b2));
    members[2][cls].assign(idx.begin() + static_cast<std::ptrdiff_t>(b2), idx.end());
  }

  SnippetDataset* dests[3] = {&out.train, &out.validation, &out.test};
  for (int split = 0; split < 3; ++split) {
    const std::size_t k = std::min(members[split][0].size(), members[split][1].size());
    std::vector<std::size_t> chosen;
    for (int cls = 0; cls < 2; ++cls)
      chosen.insert(chosen.end(), members[split][cls].begin(),
                    members[split][cls].begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t pos : chosen) {
      Snippet s = labeled[pos].first;
      s.label = labeled[pos].second;
      dests[split]->snippets.push_back(std::move(s));
    }
  }

  out.pretrain.validate();
  out.train.validate();
  out.validation.validate();
  out.test.validate();
  return out;
}

SnippetDataset subsample_labels(const SnippetDataset& dataset, double fraction,
                                std::uint64_t seed) {
  dataset.validate();
  if (dataset.split_tag == SplitTag::pretrain)
    throw InputError("subsample_labels: needs a labeled split");
  if (fraction <= 0.0 || fraction > 1.0)
    throw ConfigError("subsample_labels: fraction must lie in (0,1]");
  if (fraction == 1.0) return dataset;

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[*dataset.snippets[i].label].push_back(i);

  Rng rng(derive_seed(seed, 1));
  std::vector<std::size_t> chosen;
  for (auto& idx : by_class) {
    const std::size_t k = round_half_up(fraction * static_cast<double>(idx.size()));
    if (k == 0)
      throw InsufficientLabelsError("subsample_labels: fraction keeps zero snippets per class");
    fisher_yates(idx, rng);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  }
  std::sort(chosen.begin(), chosen.end());

  SnippetDataset out;
  out.split_tag = dataset.split_tag;
  out.metadata = dataset.metadata;
  out.snippets.reserve(chosen.size());
  for (std::size_t i : chosen) out.snippets.push_back(dataset.snippets[i]);
  out.validate();
  return out;
}

void ShardSpec::validate() const {
  if (num_shards < 1) throw ConfigError("shard: num_shards must be >= 1");
  if (shard_id >= num_shards) throw ConfigError("shard: shard_id must be < num_shards");
}

std::vector<std::size_t> shard_indices(std::size_t n, const ShardSpec& spec) {
  spec.validate();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(spec.epoch_seed);
  fisher_yates(perm, rng);
  std::vector<std::size_t> out;
  for (std::size_t i = spec.shard_id; i < n; i += spec.num_shards) out.push_back(perm[i]);
  return out;
}

SnippetDataset shard(const SnippetDataset& dataset, const ShardSpec& spec) {
  SnippetDataset out;
  out.split_tag = dataset.split_tag;
  out.metadata = dataset.metadata;
  for (std::size_t i : shard_indices(dataset.size(), spec))
    out.snippets.push_back(dataset.snippets[i]);
  return out;
}

void save_dataset(const SnippetDataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream os = io::open_output(path);
  io::write_container_header(os, io::kContentDataset);
  io::write_u8(os, static_cast<std::uint8_t>(dataset.split_tag));
  io::write_u8(os, io::kDtypeF32);
  io::write_u64(os, dataset.metadata.creation_seed);
  io::write_u64(os, dataset.size());
  io::write_u32(os, static_cast<std::uint32_t>(dataset.metadata.band_count));
  io::write_u32(os, static_cast<std::uint32_t>(dataset.metadata.snippet_size));
  for (const Snippet& s : dataset.snippets) io::write_f32_block(os, s.values);
  for (const Snippet& s : dataset.snippets)
    io::write_u8(os, s.label ? *s.label : kUnlabeled);
  for (const Snippet& s : dataset.snippets) {
    io::write_u64(os, s.scene_id);
    io::write_u32(os, s.center_row);
    io::write_u32(os, s.center_col);
  }
  std::ostringstream meta;
  meta << "split=" << split_tag_name(dataset.split_tag)
       << "\nsnippet_size=" << dataset.metadata.snippet_size << "\n";
  io::write_string(os, meta.str());
  os.flush();
  if (!os) throw InputError("write failed: " + path);
}

SnippetDataset load_dataset(const std::string& path) {
  std::ifstream is = io::open_input(path);
  io::check_container_header(is, io::kContentDataset, "snippet dataset");

  SnippetDataset out;
  const std::uint8_t tag = io::read_u8(is, "split tag");
  if (tag > 3) throw FormatError("split tag out of range");
  out.split_tag = static_cast<SplitTag>(tag);
  if (io::read_u8(is, "dtype") != io::kDtypeF32) throw FormatError("dtype: expected float32");
  out.metadata.creation_seed = io::read_u64(is, "creation seed");
  const std::uint64_t n = io::read_u64(is, "snippet count");
  out.metadata.band_count = io::read_u32(is, "band count");
  out.metadata.snippet_size = io::read_u32(is, "snippet size");
  if (out.metadata.band_count != Snippet::kBands)
    throw FormatError("band count: expected 2");
  if (n > (1ull << 32) || out.metadata.snippet_size > 65536)
    throw FormatError("implausible header counts");

  const std::size_t per =
      Snippet::kBands * out.metadata.snippet_size * out.metadata.snippet_size;
  out.snippets.resize(n);
  for (Snippet& s : out.snippets) {
    s.size = out.metadata.snippet_size;
    io::read_f32_block(is, s.values, per, "snippet values");
  }
  for (Snippet& s : out.snippets) {
    const std::uint8_t label = io::read_u8(is, "label byte");
    if (label == kUnlabeled)
      s.label.reset();
    else if (label <= 1)
      s.label = label;
    else
      throw FormatError("label byte out of range");
  }
  for (Snippet& s : out.snippets) {
    s.scene_id = io::read_u64(is, "provenance scene id");
    s.center_row = io::read_u32(is, "provenance row");
    s.center_col = io::read_u32(is, "provenance col");
  }
  io::read_string(is, "metadata block");
  io::check_no_trailing(is, path);
  out.validate();
  return out;
}

void save_scenes(const std::vector<Scene>& scenes, const std::string& path,
                 std::uint64_t creation_seed) {
  for (const Scene& s : scenes) s.image.validate();
  std::ofstream os = io::open_output(path);
  io::write_container_header(os, io::kContentScenes);
  io::write_u8(os, io::kDtypeF32);
  io::write_u64(os, creation_seed);
  io::write_u64(os, scenes.size());
  for (const Scene& s : scenes) {
    io::write_u32(os, static_cast<std::uint32_t>(s.image.height()));
    io::write_u32(os, static_cast<std::uint32_t>(s.image.width()));
    io::write_f32_block(os, s.image.lf.data());
    io::write_f32_block(os, s.image.hf.data());
    io::write_u64(os, s.truth.size());
    for (const GroundTruthObject& t : s.truth) {
      io::write_f64(os, t.center_row);
      io::write_f64(os, t.center_col);
      io::write_u8(os, static_cast<std::uint8_t>(t.cls));
      io::write_f64(os, t.extent);
    }
  }
  io::write_string(os, "kind=scenes\n");
  os.flush();
  if (!os) throw InputError("write failed: " + path);
}

std::vector<Scene> load_scenes(const std::string& path, std::uint64_t* creation_seed) {
  std::ifstream is = io::open_input(path);
  io::check_container_header(is, io::kContentScenes, "scene corpus");
  if (io::read_u8(is, "dtype") != io::kDtypeF32) throw FormatError("dtype: expected float32");
  const std::uint64_t seed = io::read_u64(is, "creation seed");
  if (creation_seed) *creation_seed = seed;
  const std::uint64_t n = io::read_u64(is, "scene count");
  if (n > (1ull << 24)) throw FormatError("implausible scene count");

  std::vector<Scene> scenes(n);
  for (Scene& s : scenes) {
    const std::uint32_t h = io::read_u32(is, "scene height");
    const std::uint32_t w = io::read_u32(is, "scene width");
    if (h == 0 || w == 0 || static_cast<std::uint64_t>(h) * w > (1ull << 28))
      throw FormatError("implausible scene shape");
    s.image.lf = Image2D(h, w);
    s.image.hf = Image2D(h, w);
    io::read_f32_block(is, s.image.lf.data(), static_cast<std::size_t>(h) * w, "lf band");
    io::read_f32_block(is, s.image.hf.data(), static_cast<std::size_t>(h) * w, "hf band");
    const std::uint64_t nt = io::read_u64(is, "truth count");
    if (nt > (1ull << 20)) throw FormatError("implausible truth count");
    s.truth.resize(nt);
    for (GroundTruthObject& t : s.truth) {
      t.center_row = io::read_f64(is, "truth row");
      t.center_col = io::read_f64(is, "truth col");
      const std::uint8_t cls = io::read_u8(is, "truth class");
      if (cls > 1) throw FormatError("truth class out of range");
      t.cls = static_cast<TruthClass>(cls);
      t.extent = io::read_f64(is, "truth extent");
    }
    s.image.validate();
  }
  io::read_string(is, "metadata block");
  io::check_no_trailing(is, path);
  return scenes;
}

}  // namespace sonarssl
