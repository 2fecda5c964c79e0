#include "cdckws/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cdckws/error.hpp"

namespace cdckws::io {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KwsError(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw KwsError(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw KwsError(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<std::uint8_t> encode_matrix(std::size_t rows, std::size_t cols, std::span<const float> values) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<float> values;
};

Matrix decode_matrix(std::span<const std::uint8_t> bytes, const std::string& name) {
  if (bytes.size() < kHeaderBytes)
    throw KwsError(ErrorCode::TruncatedFile,
                   name + ": header needs 16 bytes, file ends at byte offset " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw KwsError(ErrorCode::BadMagic, name + ": expected \"KWSP\" at byte offset 0");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion)
    throw KwsError(ErrorCode::BadVersion,
                   name + ": version " + std::to_string(version) + " at byte offset 4, expected 1");
  Matrix m;
  m.rows = get_u32(bytes, 8);
  m.cols = get_u32(bytes, 12);
  const std::size_t expected = kHeaderBytes + 4 * m.rows * m.cols;
  if (bytes.size() < expected)
    throw KwsError(ErrorCode::TruncatedFile, name + ": expected " + std::to_string(expected) +
                                                 " bytes, file ends at byte offset " +
                                                 std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw KwsError(ErrorCode::TruncatedFile, name + ": trailing data after byte offset " +
                                                 std::to_string(expected));
  m.values.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    m.values[i] = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));
  return m;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::istringstream is{std::string(line)};
  return {std::istream_iterator<std::string>(is), std::istream_iterator<std::string>()};
}

}  // namespace

std::vector<std::uint8_t> encode_posteriors(const PosteriorGram& pg) {
  return encode_matrix(pg.num_frames(), pg.vocab_size(), pg.data());
}

PosteriorGram decode_posteriors(std::span<const std::uint8_t> bytes, double frame_ms, const std::string& name) {
  Matrix m = decode_matrix(bytes, name);
  if (m.cols == 0) throw KwsError(ErrorCode::DimensionMismatch, name + ": V = 0 at byte offset 12");
  return PosteriorGram(m.rows, m.cols, std::move(m.values), frame_ms);
}

PosteriorGram load_posteriors(const fs::path& path, double frame_ms, std::vector<std::string>* warnings) {
  PosteriorGram pg = decode_posteriors(read_bytes(path), frame_ms, path.string());
  if (warnings != nullptr) {
    const double err = pg.max_normalization_error();
    const bool positive = std::any_of(pg.data().begin(), pg.data().end(), [](float v) { return v > 0.0f; });
    if (err > 1e-3)
      warnings->push_back(path.string() + ": frame probabilities deviate from 1 by up to " + std::to_string(err));
    if (positive) warnings->push_back(path.string() + ": contains positive log probabilities");
  }
  return pg;
}

void save_posteriors(const PosteriorGram& pg, const fs::path& path) {
  write_bytes(path, encode_posteriors(pg));
}

std::vector<double> load_scores(const fs::path& path) {
  Matrix m = decode_matrix(read_bytes(path), path.string());
  if (m.cols != 1)
    throw KwsError(ErrorCode::DimensionMismatch,
                   path.string() + ": score files have V = 1, found " + std::to_string(m.cols));
  return {m.values.begin(), m.values.end()};
}

void save_scores(std::span<const double> scores, const fs::path& path) {
  std::vector<float> values(scores.begin(), scores.end());
  write_bytes(path, encode_matrix(values.size(), 1, values));
}

Manifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  Manifest manifest;
  std::map<std::string, std::size_t> seen;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.main_path = base_dir / j.at("main_path").get<std::string>();
      if (j.contains("inter_path") && !j["inter_path"].is_null())
        e.inter_path = base_dir / j["inter_path"].get<std::string>();
      const auto label = j.at("label").get<std::string>();
      if (label == "positive") e.label = Label::Positive;
      else if (label == "negative") e.label = Label::Negative;
      else throw KwsError(ErrorCode::ParseError, where + ": label must be positive or negative");
      if (j.contains("snr_db") && !j["snr_db"].is_null()) e.snr_db = j["snr_db"].get<double>();
      e.duration_s = j.at("duration_s").get<double>();
      if (!(e.duration_s > 0.0)) throw KwsError(ErrorCode::ParseError, where + ": duration_s must be positive");
      if (!seen.emplace(e.id, lineno).second)
        throw KwsError(ErrorCode::DuplicateId, where + ": id \"" + e.id + "\" already used on line " +
                                                   std::to_string(seen[e.id]));
      manifest.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw KwsError(ErrorCode::ParseError, where + ": " + ex.what());
    }
  }
  return manifest;
}

Manifest load_manifest(const fs::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

std::string format_manifest(const Manifest& manifest, const fs::path& base_dir) {
  auto rel = [&](const fs::path& p) {
    if (base_dir.empty()) return p.generic_string();
    return p.lexically_proximate(base_dir).generic_string();
  };
  std::string out;
  for (const auto& e : manifest) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["main_path"] = rel(e.main_path);
    if (e.inter_path) j["inter_path"] = rel(*e.inter_path);
    j["label"] = e.label == Label::Positive ? "positive" : "negative";
    j["snr_db"] = e.snr_db ? nlohmann::ordered_json(*e.snr_db) : nlohmann::ordered_json(nullptr);
    j["duration_s"] = e.duration_s;
    out += j.dump() + "\n";
  }
  return out;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  write_text(path, format_manifest(manifest, path.parent_path()));
}

PhoneTable PhoneTable::parse(std::string_view text) {
  PhoneTable table;
  std::istringstream is{std::string(text)};
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  while (!lines.empty() && split_ws(lines.back()).empty()) lines.pop_back();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_ws(lines[i]);
    if (fields.size() != 1)
      throw KwsError(ErrorCode::ParseError,
                     "phone table line " + std::to_string(i + 1) + " must hold exactly one phone");
    if (!table.ids_.emplace(fields[0], static_cast<TokenId>(i + 1)).second)
      throw KwsError(ErrorCode::DuplicateId, "phone \"" + fields[0] + "\" listed twice");
    table.phones_.push_back(fields[0]);
  }
  return table;
}

PhoneTable PhoneTable::load(const fs::path& path) { return parse(read_text(path)); }

PhoneTable PhoneTable::cmu_default() {
  static constexpr const char* kVowels[] = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                                            "EY", "IH", "IY", "OW", "OY", "UH", "UW"};
  static constexpr const char* kConsonants[] = {"B",  "CH", "D", "DH", "F", "G",  "HH", "JH",
                                                "K",  "L",  "M", "N",  "NG", "P", "R",  "S",
                                                "SH", "T",  "TH", "V", "W",  "Y", "Z",  "ZH"};
  std::string text;
  for (const char* v : kVowels)
    for (char stress : {'0', '1', '2'}) text += std::string(v) + stress + "\n";
  for (const char* c : kConsonants) text += std::string(c) + "\n";
  text += "SPN\n";
  return parse(text);
}

std::optional<TokenId> PhoneTable::id(std::string_view phone) const {
  auto it = ids_.find(phone);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string PhoneTable::to_text() const {
  std::string out;
  for (const auto& p : phones_) out += p + "\n";
  return out;
}

Lexicon Lexicon::parse(std::string_view text, std::vector<std::string>* warnings) {
  Lexicon lex;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.starts_with(";;;")) continue;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 2)
      throw KwsError(ErrorCode::ParseError, "lexicon line " + std::to_string(lineno) + " has no phones");
    std::string word = upper(fields[0]);
    if (auto paren = word.find('('); paren != std::string::npos && word.ends_with(")")) word.resize(paren);
    std::vector<std::string> phones(fields.begin() + 1, fields.end());
    if (!lex.words_.emplace(word, std::move(phones)).second && warnings != nullptr)
      warnings->push_back("lexicon line " + std::to_string(lineno) + ": alternate pronunciation of " + word +
                          " ignored");
  }
  return lex;
}

Lexicon Lexicon::load(const fs::path& path, std::vector<std::string>* warnings) {
  return parse(read_text(path), warnings);
}

const std::vector<std::string>* Lexicon::pronunciation(std::string_view word) const {
  auto it = words_.find(upper(word));
  return it == words_.end() ? nullptr : &it->second;
}

void Lexicon::check_phones(const PhoneTable& phones) const {
  for (const auto& [word, pron] : words_)
    for (const auto& p : pron)
      if (!phones.id(p)) throw KwsError(ErrorCode::UnknownPhone, "phone \"" + p + "\" of word " + word);
}

std::vector<TokenId> keyword_to_tokens(std::string_view phrase, const Lexicon& lexicon, const PhoneTable& phones) {
  std::vector<TokenId> tokens;
  for (const auto& word : split_ws(phrase)) {
    const auto* pron = lexicon.pronunciation(word);
    if (pron == nullptr) throw KwsError(ErrorCode::UnknownWord, "word \"" + upper(word) + "\" not in lexicon");
    for (const auto& p : *pron) {
      auto id = phones.id(p);
      if (!id) throw KwsError(ErrorCode::UnknownPhone, "phone \"" + p + "\" of word " + upper(word));
      tokens.push_back(*id);
    }
  }
  if (tokens.empty()) throw KwsError(ErrorCode::EmptyKeyword, "keyword phrase is empty");
  return tokens;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KwsError(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw KwsError(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw KwsError(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace cdckws::io
