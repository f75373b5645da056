#include "gov2vec/synth.hpp"

#include "gov2vec/error.hpp"
#include "gov2vec/random.hpp"
#include "json.hpp"

namespace gov2vec {

SynthPreset parse_preset(const std::string& name) {
  if (name == "two-topic") return SynthPreset::kTwoTopic;
  if (name == "temporal-chain") return SynthPreset::kTemporalChain;
  throw InvalidArgument("unknown synth preset '" + name + "'");
}

std::string preset_name(SynthPreset preset) {
  return preset == SynthPreset::kTwoTopic ? "two-topic" : "temporal-chain";
}

void SynthSpec::validate() const {
  if (n_sources < 1 || docs_per_source < 1 || tokens_per_doc < 1 || topic_words < 1 ||
      background_words < 1) {
    throw InvalidArgument("synth counts must be >= 1");
  }
  if (!(drift >= 0.0 && drift <= 1.0)) throw InvalidArgument("drift must lie in [0, 1]");
  if (!(topic_share >= 0.0 && topic_share <= 1.0)) throw InvalidArgument("topic share must lie in [0, 1]");
}

namespace {

// Alphabetic, lower-case, never a stop word.
std::string letters(int i, int width) {
  std::string s(static_cast<std::size_t>(width), 'a');
  for (int k = width - 1; k >= 0; --k) {
    s[static_cast<std::size_t>(k)] = static_cast<char>('a' + i % 26);
    i /= 26;
  }
  return s;
}

int width_for(int n) {
  int w = 1;
  for (long cap = 26; cap < n; cap *= 26) ++w;
  return std::max(w, 3);
}

std::vector<std::string> make_words(const std::string& prefix, int n) {
  std::vector<std::string> out;
  const int w = width_for(n);
  for (int i = 0; i < n; ++i) out.push_back(prefix + letters(i, w));
  return out;
}

const std::string& pick(const std::vector<std::string>& words, Rng& rng) {
  return words[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(words.size()) - 1))];
}

}  // namespace

std::string GroundTruth::to_json() const {
  nlohmann::json j;
  j["preset"] = preset_name(preset);
  j["sources"] = nlohmann::json::array();
  for (const auto& s : sources) {
    nlohmann::json o{{"id", s.id}, {"position", s.position}, {"mix", s.mix}};
    if (!s.topic_words.empty()) o["topic_words"] = s.topic_words;
    j["sources"].push_back(std::move(o));
  }
  j["topics"] = topics;
  j["background"] = background;
  nlohmann::json order = nlohmann::json::array();
  for (const auto& s : sources) order.push_back(s.id);
  j["order"] = order;
  return j.dump(2);
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus out;
  auto& truth = out.truth;
  truth.preset = spec.preset;
  truth.background = make_words("common", spec.background_words);
  truth.topics = {make_words("topica", spec.topic_words), make_words("topicb", spec.topic_words)};

  std::vector<Source> sources;
  if (spec.preset == SynthPreset::kTwoTopic) {
    truth.sources = {{"A", 1, truth.topics[0], 0.0}, {"B", 2, truth.topics[1], 1.0}};
    sources = {{"A", std::nullopt}, {"B", std::nullopt}};
  } else {
    const int n = spec.n_sources;
    for (int k = 0; k < n; ++k) {
      const double mix = n == 1 ? 0.0 : spec.drift * k / (n - 1);
      truth.sources.push_back({"s" + std::to_string(k + 1), k + 1, {}, mix});
      sources.push_back({"s" + std::to_string(k + 1), k + 1});
    }
  }
  out.graph = SourceGraph(std::move(sources));

  Rng rng(splitmix64(spec.seed ^ 0x73796e7468ULL));
  for (const auto& src : truth.sources) {
    for (int doc = 0; doc < spec.docs_per_source; ++doc) {
      std::string text;
      for (int t = 0; t < spec.tokens_per_doc; ++t) {
        const std::string* word;
        if (uniform01(rng) >= spec.topic_share) {
          word = &pick(truth.background, rng);
        } else {
          const bool second = uniform01(rng) < src.mix;
          word = &pick(truth.topics[second ? 1 : 0], rng);
        }
        if (!text.empty()) text += ' ';
        text += *word;
      }
      text += '.';
      char id[32];
      std::snprintf(id, sizeof id, "-%04d", doc + 1);
      out.docs.push_back({src.id + id, std::move(text), {src.id}});
    }
  }
  return out;
}

}  // namespace gov2vec
