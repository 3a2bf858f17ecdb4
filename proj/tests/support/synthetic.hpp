#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Synthetic picture-description transcripts in CHAT format. AD transcripts use
// more fillers, pauses, trailing-off markers and vague nouns, and have longer
// utterances and pauses. MMSE is 10-24 for AD and 26-30 for controls.
namespace synthetic {

struct Corpus {
  std::vector<std::string> ids;
  std::vector<std::string> chat;  // file contents
  std::vector<int> labels;        // 1 = AD
  std::vector<int> mmse;
};

Corpus make_corpus(std::size_t n, std::uint64_t seed);

// Writes <dir>/<id>.cha for every transcript.
void write_corpus(const Corpus& corpus, const std::string& dir);

// Embedding CSV whose rows are a fixed random direction scaled by MMSE, plus
// small noise, and the matching provenance sidecar.
std::string embeddings_csv(const Corpus& corpus, std::size_t dim, std::uint64_t seed);
std::string embeddings_sidecar(std::size_t dim);

}  // namespace synthetic
