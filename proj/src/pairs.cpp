#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "lens/corpus.hpp"

namespace lens {
namespace {

template <class Int>
bool parse_int(std::string_view field, Int& out) {
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

std::size_t RelatednessList::num_classes() const {
  if (mode != PairMode::kClassify) return 0;
  std::int32_t top = -1;
  for (const auto& e : entries) top = std::max(top, e.label);
  return static_cast<std::size_t>(top + 1);
}

std::vector<std::size_t> RelatednessList::class_histogram() const {
  std::vector<std::size_t> hist(num_classes(), 0);
  for (const auto& e : entries)
    if (e.label >= 0) ++hist[static_cast<std::size_t>(e.label)];
  return hist;
}

RelatednessList parse_pairs(std::string_view text, PairMode mode, const std::string& name) {
  RelatednessList list;
  list.mode = mode;
  const std::size_t want = mode == PairMode::kClassify ? 3 : 2;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const auto at = static_cast<std::int64_t>(line_no);
    if (fields.size() != want) {
      throw ParseError(ParseErrorKind::kFormat, name, at,
                       "expected " + std::to_string(want) + " tab-separated columns, got " +
                           std::to_string(fields.size()));
    }
    PairEntry e;
    e.line = line_no;
    if (!parse_int(fields[0], e.a) || !parse_int(fields[1], e.b)) {
      throw ParseError(ParseErrorKind::kFormat, name, at, "ids must be unsigned decimal integers");
    }
    if (mode == PairMode::kClassify && (!parse_int(fields[2], e.label) || e.label < 0)) {
      throw ParseError(ParseErrorKind::kFormat, name, at,
                       "label '" + std::string(fields[2]) + "' is not a non-negative integer");
    }
    list.entries.push_back(e);
  }
  return list;
}

RelatednessList read_pairs(const std::filesystem::path& path, PairMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pairs(buf.str(), mode, path.string());
}

std::string format_pairs(const RelatednessList& list) {
  std::string out;
  for (const auto& e : list.entries) {
    out += std::to_string(e.a);
    out += '\t';
    out += std::to_string(e.b);
    if (list.mode == PairMode::kClassify) {
      out += '\t';
      out += std::to_string(e.label);
    }
    out += '\n';
  }
  return out;
}

void write_pairs(const RelatednessList& list, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << format_pairs(list);
  if (!out) throw IoError("cannot write " + path.string());
}

void bind_pairs(const RelatednessList& list, std::span<const EmbeddingCorpus* const> corpora,
                const std::string& name) {
  auto known = [&](std::uint64_t id) {
    return std::any_of(corpora.begin(), corpora.end(),
                       [id](const EmbeddingCorpus* c) { return c->contains(id); });
  };
  for (const auto& e : list.entries) {
    for (std::uint64_t id : {e.a, e.b}) {
      if (!known(id)) {
        throw ParseError(ParseErrorKind::kUnknownId, name, static_cast<std::int64_t>(e.line),
                         "id " + std::to_string(id) + " is not in any bound corpus");
      }
    }
  }
  if (list.mode == PairMode::kClassify && !list.entries.empty() && list.num_classes() < 2) {
    throw ConfigError(name + ": classify mode needs at least 2 classes");
  }
}

void bind_pairs(const RelatednessList& list, const EmbeddingCorpus& corpus, const std::string& name) {
  const EmbeddingCorpus* one[] = {&corpus};
  bind_pairs(list, one, name);
}

}  // namespace lens
