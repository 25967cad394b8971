#include "lens/corpus.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "binio.hpp"

namespace lens {

namespace binio {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("cannot read " + path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace binio

namespace {

constexpr char kMagic[4] = {'C', 'L', 'E', 'M'};

std::string validate_lang(const std::string& lang) {
  if (lang.empty() || lang.size() > kLangTagBytes) {
    return "language tag must be 1..8 characters, got '" + lang + "'";
  }
  for (char c : lang) {
    if (c <= ' ' || c > '~') return "language tag '" + lang + "' is not printable ASCII without spaces";
  }
  return {};
}

}  // namespace

void EmbeddingCorpus::add(EmbeddingRecord record) {
  const std::string ctx = "record id " + std::to_string(record.id) + ": ";
  if (record.embeddings.rank() != 2) throw DimensionError(ctx + "embeddings must be a K x T matrix");
  if (dim_ == 0 && records_.empty()) dim_ = record.dim();
  if (record.dim() != dim_) {
    throw DimensionError(ctx + "K=" + std::to_string(record.dim()) + " but corpus K=" +
                         std::to_string(dim_));
  }
  if (record.tokens() == 0) throw EmptySequenceError(ctx + "T must be >= 1");
  if (!record.embeddings.all_finite()) throw NumericError(ctx + "non-finite embedding value");
  if (auto err = validate_lang(record.lang); !err.empty()) throw ConfigError(ctx + err);
  if (index_.contains(record.id)) throw ConfigError(ctx + "duplicate id");
  index_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

const EmbeddingRecord* EmbeddingCorpus::find(std::uint64_t id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

const EmbeddingRecord& EmbeddingCorpus::at_id(std::uint64_t id) const {
  if (const auto* r = find(id)) return *r;
  throw ConfigError("unknown record id " + std::to_string(id));
}

EmbeddingCorpus EmbeddingCorpus::merge(std::span<const EmbeddingCorpus> parts) {
  EmbeddingCorpus out(parts.empty() ? 0 : parts.front().dim());
  for (const auto& part : parts) {
    if (part.empty()) continue;
    if (out.dim() != 0 && part.dim() != out.dim()) {
      throw ParseError(ParseErrorKind::kInconsistentDim, "<merge>", -1,
                       "corpora have K=" + std::to_string(out.dim()) + " and K=" +
                           std::to_string(part.dim()));
    }
    for (const auto& r : part.records()) out.add(r);
  }
  return out;
}

std::vector<unsigned char> serialize_corpus(const EmbeddingCorpus& corpus) {
  binio::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCorpusVersion);
  w.u32(static_cast<std::uint32_t>(corpus.dim()));
  w.u64(corpus.size());
  for (const auto& r : corpus.records()) {
    w.u64(r.id);
    char tag[kLangTagBytes];
    std::memset(tag, ' ', sizeof tag);
    std::memcpy(tag, r.lang.data(), std::min(r.lang.size(), kLangTagBytes));
    w.bytes(tag, sizeof tag);
    w.u32(static_cast<std::uint32_t>(r.tokens()));
    w.f32s(r.embeddings.data());
  }
  return w.release();
}

EmbeddingCorpus parse_corpus(std::span<const unsigned char> bytes, const std::string& name) {
  binio::Reader in(bytes, name);
  char magic[4];
  if (in.remaining() < 4) in.fail(ParseErrorKind::kBadMagic, "file shorter than magic");
  in.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) in.fail(ParseErrorKind::kBadMagic, "missing CLEM magic");
  const std::uint32_t version = in.u32();
  if (version != kCorpusVersion) {
    in.fail(ParseErrorKind::kVersionMismatch, "unsupported CLEM version " + std::to_string(version));
  }
  const std::uint32_t K = in.u32();
  const std::uint64_t N = in.u64();
  if (K == 0 && N > 0) in.fail(ParseErrorKind::kInconsistentDim, "K=0 with records present");

  constexpr std::size_t kMinRecord = 8 + kLangTagBytes + 4;
  EmbeddingCorpus corpus(K);
  for (std::uint64_t i = 0; i < N; ++i) {
    in.set_record(static_cast<std::int64_t>(i));
    in.need(kMinRecord);
    EmbeddingRecord r;
    r.id = in.u64();
    char tag[kLangTagBytes];
    in.bytes(tag, sizeof tag);
    std::size_t len = kLangTagBytes;
    while (len > 0 && tag[len - 1] == ' ') --len;
    r.lang.assign(tag, len);
    const std::uint32_t T = in.u32();
    if (T == 0) in.fail(ParseErrorKind::kFormat, "record has T=0");
    const std::uint64_t count = std::uint64_t{K} * T;
    if (count > std::numeric_limits<std::size_t>::max() / 4) {
      in.fail(ParseErrorKind::kTruncated, "record size overflows");
    }
    in.need(static_cast<std::size_t>(count) * 4);
    Tensor<float> e({K, T});
    in.f32s(e.data());
    r.embeddings = std::move(e);
    try {
      corpus.add(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& err) {
      in.fail(ParseErrorKind::kFormat, err.what());
    }
  }
  in.set_record(-1);
  if (in.remaining() != 0) {
    in.fail(ParseErrorKind::kFormat, std::to_string(in.remaining()) + " trailing bytes");
  }
  return corpus;
}

void write_corpus(const EmbeddingCorpus& corpus, const std::filesystem::path& path) {
  const auto bytes = serialize_corpus(corpus);
  binio::write_file(path, bytes);
}

EmbeddingCorpus read_corpus(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  return parse_corpus(bytes, path.string());
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t content_hash(const EmbeddingCorpus& corpus) {
  return fnv1a64(serialize_corpus(corpus));
}

}  // namespace lens
