#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scout/autodiff.hpp"

namespace scout {

struct EmptyQuery : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroVector : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VocabFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LanguageEmbedding {
  Tensor e;  // (1, d_e), unit norm
  std::string query_text;
};

// Word-vector table with a seeded hash fallback for out-of-vocabulary words.
// Stands in for a pretrained sentence encoder.
class Vocabulary {
 public:
  Vocabulary(int dim, std::uint64_t hash_seed)
      : dim_(dim), hash_seed_(hash_seed) {}

  int dim() const { return dim_; }
  std::uint64_t hash_seed() const { return hash_seed_; }

  // Inserts a word vector; stored renormalized to unit norm.
  void add_word(const std::string& word, std::vector<double> vec);
  bool has_word(const std::string& word) const {
    return table_.count(word) > 0;
  }

  // Vector for one word: table entry, or the deterministic hash fallback.
  std::vector<double> word_vector(const std::string& word) const;

  const std::map<std::string, std::vector<double>>& table() const {
    return table_;
  }

  static Vocabulary load(const std::string& path);
  static Vocabulary parse_json(const std::string& json_text);
  std::string to_json() const;
  void save(const std::string& path) const;

 private:
  int dim_;
  std::uint64_t hash_seed_;
  std::map<std::string, std::vector<double>> table_;
};

// Lowercased word tokens; embedding = renormalized mean of word vectors.
LanguageEmbedding embed_language(const std::string& query,
                                 const Vocabulary& vocab);

double cosine_similarity(const LanguageEmbedding& a,
                         const LanguageEmbedding& b);

std::vector<std::string> tokenize_lower(const std::string& text);

}  // namespace scout
