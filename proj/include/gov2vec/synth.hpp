#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gov2vec/corpus.hpp"
#include "gov2vec/trainer.hpp"

namespace gov2vec {

enum class SynthPreset { kTwoTopic, kTemporalChain };

SynthPreset parse_preset(const std::string& name);
std::string preset_name(SynthPreset preset);

struct SynthSpec {
  SynthPreset preset = SynthPreset::kTwoTopic;
  int n_sources = 8;  // temporal chain only; two-topic always has two
  int docs_per_source = 200;
  int tokens_per_doc = 100;
  int topic_words = 50;
  int background_words = 200;
  double topic_share = 0.7;
  double drift = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthSourceTruth {
  std::string id;
  std::int64_t position = 0;
  // Two-topic: the source's own topic vocabulary. Chain: empty.
  std::vector<std::string> topic_words;
  // Chain: share of the topic mass drawn from the second endpoint topic.
  double mix = 0.0;
};

struct GroundTruth {
  SynthPreset preset = SynthPreset::kTwoTopic;
  std::vector<SynthSourceTruth> sources;            // in true order
  std::vector<std::vector<std::string>> topics;     // topic vocabularies
  std::vector<std::string> background;

  std::string to_json() const;
};

struct SynthCorpus {
  std::vector<RawDocument> docs;
  SourceGraph graph;
  GroundTruth truth;
};

// Two-topic: sources A and B mix their own topic (topic_share) with a shared
// background. Temporal chain: source k blends two endpoint topics with weight
// drift * k / (n - 1); positions are 1..n.
SynthCorpus generate(const SynthSpec& spec);

}  // namespace gov2vec
