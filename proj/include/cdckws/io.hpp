#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdckws/eval.hpp"
#include "cdckws/posteriorgram.hpp"

namespace cdckws::io {

namespace fs = std::filesystem;

// Posterior / score file layout, little-endian throughout:
//   "KWSP" | u32 version=1 | u32 T | u32 V | T*V float32 (row-major)
inline constexpr char kMagic[4] = {'K', 'W', 'S', 'P'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

/// Throws BadMagic, BadVersion, TruncatedFile or IoError. Frames whose
/// probabilities do not sum to 1 within 1e-3 are reported in `warnings`.
PosteriorGram load_posteriors(const fs::path& path, double frame_ms = kDefaultFrameMs,
                              std::vector<std::string>* warnings = nullptr);
void save_posteriors(const PosteriorGram& pg, const fs::path& path);

std::vector<std::uint8_t> encode_posteriors(const PosteriorGram& pg);
PosteriorGram decode_posteriors(std::span<const std::uint8_t> bytes, double frame_ms = kDefaultFrameMs,
                                const std::string& name = "<memory>");

/// Score streams share the posterior layout with V = 1.
std::vector<double> load_scores(const fs::path& path);
void save_scores(std::span<const double> scores, const fs::path& path);

struct ManifestEntry {
  std::string id;
  fs::path main_path;                 // resolved against the manifest directory
  std::optional<fs::path> inter_path;
  Label label = Label::Negative;
  std::optional<double> snr_db;       // nullopt = clean
  double duration_s = 0.0;
};

using Manifest = std::vector<ManifestEntry>;

/// One JSON object per line. Throws ParseError or DuplicateId.
Manifest load_manifest(const fs::path& path);
Manifest parse_manifest(std::string_view text, const fs::path& base_dir);
/// Paths are written relative to `base_dir` when they live below it.
std::string format_manifest(const Manifest& manifest, const fs::path& base_dir);
void save_manifest(const Manifest& manifest, const fs::path& path);

/// Phone table: one phone per line, token id = 1-based line number; 0 is blank.
class PhoneTable {
 public:
  static PhoneTable parse(std::string_view text);
  static PhoneTable load(const fs::path& path);
  /// 69 CMU phones with stress variants plus SPN.
  static PhoneTable cmu_default();

  std::optional<TokenId> id(std::string_view phone) const;
  const std::string& phone(TokenId id) const { return phones_.at(id - 1); }
  std::size_t size() const noexcept { return phones_.size(); }
  /// Phones plus blank.
  std::size_t vocab_size() const noexcept { return phones_.size() + 1; }
  std::string to_text() const;

 private:
  std::vector<std::string> phones_;
  std::map<std::string, TokenId, std::less<>> ids_;
};

/// CMU-style pronunciations. The first pronunciation of a word wins; later
/// ones (including "WORD(2)" variants) are ignored with a warning.
class Lexicon {
 public:
  static Lexicon parse(std::string_view text, std::vector<std::string>* warnings = nullptr);
  static Lexicon load(const fs::path& path, std::vector<std::string>* warnings = nullptr);

  const std::vector<std::string>* pronunciation(std::string_view word) const;
  std::size_t size() const noexcept { return words_.size(); }
  /// Throws UnknownPhone naming the first phone missing from the table.
  void check_phones(const PhoneTable& phones) const;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> words_;
};

/// Concatenated phone ids of every word in the phrase. Throws UnknownWord/UnknownPhone.
std::vector<TokenId> keyword_to_tokens(std::string_view phrase, const Lexicon& lexicon,
                                       const PhoneTable& phones);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

}  // namespace cdckws::io
