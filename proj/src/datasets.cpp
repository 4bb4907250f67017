#include "lasnn/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace lasnn {
namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file: " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t be32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

float normalize_byte(unsigned char p) { return static_cast<float>(p) / 127.5f - 1.0f; }

}  // namespace

std::vector<LabeledImage> load_idx(const std::string& images_path,
                                   const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (img.size() < 16 || be32(img.data()) != 0x00000803u)
    throw std::runtime_error("bad IDX image magic in " + images_path);
  if (lab.size() < 8 || be32(lab.data()) != 0x00000801u)
    throw std::runtime_error("bad IDX label magic in " + labels_path);
  const std::uint32_t n = be32(img.data() + 4);
  const std::uint32_t rows = be32(img.data() + 8);
  const std::uint32_t cols = be32(img.data() + 12);
  const std::uint32_t nl = be32(lab.data() + 4);
  if (n != nl)
    throw std::runtime_error("IDX count mismatch: " + std::to_string(n) + " images vs " +
                             std::to_string(nl) + " labels");
  const std::size_t pix = static_cast<std::size_t>(rows) * cols;
  if (img.size() != 16 + static_cast<std::size_t>(n) * pix)
    throw std::runtime_error("truncated IDX image file " + images_path);
  if (lab.size() != 8 + static_cast<std::size_t>(n))
    throw std::runtime_error("truncated IDX label file " + labels_path);
  std::vector<LabeledImage> out(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    out[i].pixels = Tensor({1, static_cast<int>(rows), static_cast<int>(cols)});
    const unsigned char* src = img.data() + 16 + static_cast<std::size_t>(i) * pix;
    for (std::size_t j = 0; j < pix; ++j) out[i].pixels[static_cast<std::int64_t>(j)] = normalize_byte(src[j]);
    out[i].label = lab[8 + i];
  }
  return out;
}

std::vector<LabeledImage> load_cifar10(const std::vector<std::string>& batch_paths) {
  constexpr std::size_t kRecord = 3073;
  std::vector<LabeledImage> out;
  for (const std::string& path : batch_paths) {
    const auto raw = read_file(path);
    if (raw.empty() || raw.size() % kRecord != 0)
      throw std::runtime_error("cifar10 file length " + std::to_string(raw.size()) +
                               " is not a multiple of 3073: " + path);
    const std::size_t n = raw.size() / kRecord;
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned char* rec = raw.data() + i * kRecord;
      LabeledImage li;
      li.label = rec[0];
      li.pixels = Tensor({3, 32, 32});
      for (std::size_t j = 0; j < 3072; ++j)
        li.pixels[static_cast<std::int64_t>(j)] = normalize_byte(rec[1 + j]);
      out.push_back(std::move(li));
    }
  }
  return out;
}

std::vector<LabeledImage> subset(std::vector<LabeledImage> items, int count,
                                 std::uint64_t seed) {
  if (count <= 0 || static_cast<std::size_t>(count) >= items.size()) return items;
  std::vector<int> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_below(i)]);
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(std::move(items[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]));
  return out;
}

std::vector<LabeledImage> load_split(const DatasetSpec& spec, bool train) {
  const auto& paths = train ? spec.train_paths : spec.test_paths;
  std::vector<LabeledImage> items;
  if (spec.name == "cifar10") {
    items = load_cifar10(paths);
  } else {
    if (paths.size() != 2)
      throw std::runtime_error("IDX dataset needs an images path and a labels path");
    items = load_idx(paths[0], paths[1]);
  }
  if (items.empty()) throw std::runtime_error("dataset split is empty");
  for (const LabeledImage& li : items) {
    if (li.label < 0 || li.label >= spec.classes)
      throw std::runtime_error("label " + std::to_string(li.label) + " out of range for " +
                               std::to_string(spec.classes) + " classes");
    if (li.pixels.shape != spec.image_shape)
      throw std::runtime_error("image shape " + shape_str(li.pixels.shape) +
                               " does not match dataset spec " + shape_str(spec.image_shape));
  }
  const int want = train ? spec.train_subset : spec.test_subset;
  return subset(std::move(items), want,
                derive_seed(spec.subset_seed, train ? "subset-train" : "subset-test"));
}

BatchIter::BatchIter(const std::vector<LabeledImage>& data, int batch_size,
                     std::uint64_t shuffle_seed, int epoch)
    : data_(data), batch_size_(batch_size) {
  if (data.empty()) throw std::invalid_argument("batch_iter: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("batch_iter: batch size must be >= 1");
  order_.resize(data.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (shuffle_seed != 0) {
    Rng rng(derive_seed(shuffle_seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[rng.next_below(i)]);
  }
}

int BatchIter::batch_count() const {
  return static_cast<int>((order_.size() + batch_size_ - 1) / batch_size_);
}

bool BatchIter::next(Batch* out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t take = std::min<std::size_t>(batch_size_, order_.size() - pos_);
  const Shape& img = data_[0].pixels.shape;
  out->images = Tensor({static_cast<int>(take), img[0], img[1], img[2]});
  out->labels.resize(take);
  out->indices.resize(take);
  const std::size_t stride = data_[0].pixels.data.size();
  for (std::size_t i = 0; i < take; ++i) {
    const int src = order_[pos_ + i];
    out->indices[i] = src;
    out->labels[i] = data_[static_cast<std::size_t>(src)].label;
    std::copy(data_[static_cast<std::size_t>(src)].pixels.data.begin(),
              data_[static_cast<std::size_t>(src)].pixels.data.end(),
              out->images.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  pos_ += take;
  return true;
}

}  // namespace lasnn
