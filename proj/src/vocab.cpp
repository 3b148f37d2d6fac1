#include "scout/vocab.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scout/rng.hpp"

namespace scout {

using nlohmann::json;

namespace {

std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n < 1e-12) throw ZeroVector("cannot normalize a zero vector");
  for (double& x : v) x /= n;
  return v;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void Vocabulary::add_word(const std::string& word, std::vector<double> vec) {
  if (static_cast<int>(vec.size()) != dim_) {
    throw VocabFormatError("word vector dimension mismatch: " + word);
  }
  table_[word] = unit(std::move(vec));
}

std::vector<double> Vocabulary::word_vector(const std::string& word) const {
  const auto it = table_.find(word);
  if (it != table_.end()) return it->second;
  // Reproducible fallback: seeded Gaussian direction derived from the word.
  Rng rng(fnv1a(word, hash_seed_));
  std::vector<double> v(static_cast<std::size_t>(dim_));
  for (double& x : v) x = rng.normal();
  return unit(std::move(v));
}

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

LanguageEmbedding embed_language(const std::string& query,
                                 const Vocabulary& vocab) {
  const auto tokens = tokenize_lower(query);
  if (tokens.empty()) throw EmptyQuery("query has no word tokens");
  std::vector<double> mean(static_cast<std::size_t>(vocab.dim()), 0.0);
  for (const auto& word : tokens) {
    const auto v = vocab.word_vector(word);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
  }
  for (double& x : mean) x /= static_cast<double>(tokens.size());
  LanguageEmbedding emb;
  emb.e = Tensor::row(unit(std::move(mean)));
  emb.query_text = query;
  return emb;
}

double cosine_similarity(const LanguageEmbedding& a,
                         const LanguageEmbedding& b) {
  if (a.e.size() != b.e.size()) {
    throw ShapeMismatch("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.e.size(); ++i) {
    dot += a.e.data[i] * b.e.data[i];
    na += a.e.data[i] * a.e.data[i];
    nb += b.e.data[i] * b.e.data[i];
  }
  if (na < 1e-24 || nb < 1e-24) {
    throw ZeroVector("cosine_similarity: zero vector");
  }
  return dot / std::sqrt(na * nb);
}

Vocabulary Vocabulary::parse_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw VocabFormatError(std::string("vocab parse error: ") + e.what());
  }
  const std::uint64_t seed = j.value("hash_seed", 0ULL);
  int dim = j.value("dim", 0);
  if (dim == 0) {
    for (const auto& [key, val] : j.items()) {
      if (key != "hash_seed" && key != "dim" && val.is_array()) {
        dim = static_cast<int>(val.size());
        break;
      }
    }
  }
  if (dim == 0) throw VocabFormatError("vocabulary dimension undetermined");
  Vocabulary vocab(dim, seed);
  for (const auto& [key, val] : j.items()) {
    if (key == "hash_seed" || key == "dim") continue;
    vocab.add_word(key, val.get<std::vector<double>>());
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw VocabFormatError("cannot open vocabulary: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

std::string Vocabulary::to_json() const {
  json j;
  j["hash_seed"] = hash_seed_;
  j["dim"] = dim_;
  for (const auto& [word, vec] : table_) j[word] = vec;
  return j.dump(2);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw VocabFormatError("cannot write vocabulary: " + path);
  out << to_json() << "\n";
}

}  // namespace scout
