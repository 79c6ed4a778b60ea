// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/catalog.hpp"

#include <json.hpp>

#include "rpp/dataset.hpp"
#include "rpp/error.hpp"

namespace rpp {
namespace {

using nlohmann::json;

std::size_t count_occurrences(std::string_view text, std::string_view token) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(token); pos != std::string_view::npos;
       pos = text.find(token, pos + token.size())) {
    ++n;
  }
  return n;
}

// Any "<SeqH" that is not one of the two known placeholders.
bool has_unknown_placeholder(std::string_view text) {
  for (std::size_t pos = text.find("<SeqH"); pos != std::string_view::npos;
       pos = text.find("<SeqH", pos + 1)) {
    auto rest = text.substr(pos);
    if (!rest.starts_with(kHistoryPlaceholder) &&
        !rest.starts_with(kCandidatePlaceholder)) {
      return true;
    }
  }
  return false;
}

std::string replace_once(std::string text, std::string_view token,
                         std::string_view value) {
  auto pos = text.find(token);
  if (pos == std::string::npos) return text;
  text.replace(pos, token.size(), value);
  return text;
}

void check_sentence(std::string_view pattern, std::size_t index,
                    std::string_view text, std::size_t want_history,
                    std::size_t want_candidates) {
  auto where = [&] {
    return std::string(pattern) + "[" + std::to_string(index) + "]";
  };
  if (text.empty()) throw validation_error("empty sentence " + where());
  if (text.find_first_of("\r\n") != std::string_view::npos) {
    throw validation_error("sentence " + where() + " contains a line break");
  }
  if (has_unknown_placeholder(text)) {
    throw validation_error("sentence " + where() + " has an unknown placeholder");
  }
  if (count_occurrences(text, kHistoryPlaceholder) != want_history ||
      count_occurrences(text, kCandidatePlaceholder) != want_candidates) {
    throw validation_error("sentence " + where() +
                           " has misplaced <SeqH1>/<SeqH2> placeholders");
  }
}

std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw parse_error(std::string("catalog is missing list '") + key + "'");
  }
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

PatternSizes ActionCatalog::sizes() const {
  return {role_sentences.size(), history_increments.size(),
          reasoning_sentences.size(), output_sentences.size()};
}

std::size_t ActionCatalog::joint_space_size() const {
  std::size_t n = 1;
  for (std::size_t s : sizes()) n *= s;
  return n;
}

const std::string& ActionCatalog::sentence(PatternKind k, std::size_t index) const {
  switch (k) {
    case PatternKind::kRolePlaying: return role_sentences.at(index);
    case PatternKind::kHistoryRecords: return history_template;
    case PatternKind::kReasoningGuidance: return reasoning_sentences.at(index);
    case PatternKind::kOutputFormat: return output_sentences.at(index);
  }
  throw invalid_argument("unknown pattern");
}

void ActionCatalog::validate() const {
  if (role_sentences.empty() || history_increments.empty() ||
      reasoning_sentences.empty() || output_sentences.empty()) {
    throw validation_error("every pattern needs at least one action");
  }
  if (initial_history_length < 1) {
    throw validation_error("initial history length must be at least 1");
  }
  for (std::size_t i = 0; i < role_sentences.size(); ++i) {
    check_sentence("role_playing", i, role_sentences[i], 0, 0);
  }
  check_sentence("history_records", 0, history_template, 1, 0);
  for (std::size_t i = 0; i < reasoning_sentences.size(); ++i) {
    check_sentence("reasoning_guidance", i, reasoning_sentences[i], 0, 1);
  }
  for (std::size_t i = 0; i < output_sentences.size(); ++i) {
    check_sentence("output_format", i, output_sentences[i], 0, 0);
  }
  JointAction manual = manual_action;
  manual[PatternKind::kHistoryRecords] = 0;
  validate_joint_action(manual, sizes());
}

ActionCatalog default_action_catalog() {
  ActionCatalog c;
  c.role_sentences = {
      "You are a movie expert.",
      "You are good at recommending movies.",
      "You are good at catching people's movie interest.",
  };
  c.history_template = "I've watched these movies <SeqH1> recently.";
  c.history_increments = {1, 2, 4, 8};
  c.reasoning_sentences = {
      "Please rank these candidate movies <SeqH2> in order of priority from "
      "highest to lowest.",
      "Please rank these candidate movies <SeqH2> according to my watching "
      "history.",
      "Please rank these candidate movies <SeqH2> based on my movie "
      "preferences which are inferred from my watching history.",
      "Please rank these candidate movies <SeqH2> and think step by step.",
      "Please rank these candidate movies <SeqH2> and refine the ranking "
      "results according to my watching history.",
      "Please rank these candidate movies <SeqH2> after calculating the "
      "similarity between them and my movie preferences, according to my "
      "watching history.",
      "Please rank these candidate movies <SeqH2> after inferring my "
      "preference from my watching history.",
      "Please summarize my movie preferences from my watching history, then "
      "use that summary to rank these candidate movies <SeqH2>.",
      "Please compare each of these candidate movies <SeqH2> with the movies "
      "I watched recently and rank them by how well they match my taste.",
  };
  c.output_sentences = {
      "Please only output the ranking results with order numbers. Split these "
      "order numbers with a line break.",
      "Attention! Just output the ranking results with order numbers and "
      "ignore any unnecessary steps.",
      "Please only output the ranking results with order numbers. Do not "
      "explain the reason or include any other words.",
      "Please only output the ranking results with order numbers. Your output "
      "format should be like this: x. movie title, x is the order number.",
      "Output one movie title per line, each preceded by its rank number, and "
      "write nothing else.",
  };
  c.initial_history_length = 1;
  c.manual_action.index = {0, 0, 6, 2};
  return c;
}

ActionCatalog parse_action_catalog(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("catalog is not valid JSON: ") + e.what());
  }
  ActionCatalog c;
  try {
    c.role_sentences = string_list(j, "role_playing");
    c.reasoning_sentences = string_list(j, "reasoning_guidance");
    c.output_sentences = string_list(j, "output_format");
    const json& h = j.at("history_records");
    c.history_template = h.at("template").get<std::string>();
    c.history_increments = h.at("increments").get<std::vector<std::size_t>>();
    c.initial_history_length = h.value("initial_length", std::size_t{1});
    if (j.contains("manual_prompt")) {
      const json& m = j.at("manual_prompt");
      c.manual_action[PatternKind::kRolePlaying] = m.at("role_playing").get<std::size_t>();
      c.manual_action[PatternKind::kReasoningGuidance] =
          m.at("reasoning_guidance").get<std::size_t>();
      c.manual_action[PatternKind::kOutputFormat] = m.at("output_format").get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed catalog: ") + e.what());
  }
  c.validate();
  return c;
}

ActionCatalog load_action_catalog(const std::filesystem::path& path) {
  return parse_action_catalog(read_file(path));
}

std::string dump_action_catalog(const ActionCatalog& c) {
  json j;
  j["role_playing"] = c.role_sentences;
  j["history_records"] = {{"template", c.history_template},
                          {"increments", c.history_increments},
                          {"initial_length", c.initial_history_length}};
  j["reasoning_guidance"] = c.reasoning_sentences;
  j["output_format"] = c.output_sentences;
  j["manual_prompt"] = {
      {"role_playing", c.manual_action[PatternKind::kRolePlaying]},
      {"reasoning_guidance", c.manual_action[PatternKind::kReasoningGuidance]},
      {"output_format", c.manual_action[PatternKind::kOutputFormat]}};
  return j.dump(2) + "\n";
}

std::string render_history_list(const UserRecord& user, std::size_t l) {
  const std::size_t n = std::min(l, user.history.size());
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ", ";
    out += '"';
    out += user.history[user.history.size() - 1 - i].title;
    out += '"';
  }
  return out;
}

std::string render_candidate_list(const CandidateSet& cands) {
  std::string out;
  for (std::size_t i = 0; i < cands.items.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(i + 1);
    out += ". \"";
    out += cands.items[i].title;
    out += '"';
  }
  return out;
}

std::string history_sentence(const ActionCatalog& catalog,
                             const UserRecord& user, std::size_t l) {
  return replace_once(catalog.history_template, kHistoryPlaceholder,
                      render_history_list(user, std::max<std::size_t>(l, 1)));
}

std::size_t apply_length_action(std::size_t l_prev, std::size_t increment,
                                std::size_t history_len) {
  return std::min(l_prev + increment, history_len);
}

PromptSentences select_sentences(const ActionCatalog& catalog,
                                 const JointAction& action) {
  validate_joint_action(action, catalog.sizes());
  PromptSentences s;
  for (PatternKind k : kAllPatterns) {
    s.text[pattern_index(k)] = catalog.sentence(k, action[k]);
  }
  return s;
}

AssembledPrompt render_prompt(const PromptSentences& sentences,
                              const UserRecord& user, const CandidateSet& cands,
                              const JointAction& action, std::size_t l_t) {
  const std::size_t used = std::min(l_t, user.history.size());
  const bool wants_history = std::any_of(
      sentences.text.begin(), sentences.text.end(),
      [](const std::string& s) { return s.find(kHistoryPlaceholder) != std::string::npos; });
  const bool wants_candidates = std::any_of(
      sentences.text.begin(), sentences.text.end(),
      [](const std::string& s) { return s.find(kCandidatePlaceholder) != std::string::npos; });
  if (wants_history && used == 0) {
    throw validation_error("prompt references <SeqH1> but the history is empty");
  }
  if (wants_candidates && cands.items.empty()) {
    throw validation_error("prompt references <SeqH2> but there are no candidates");
  }
  const std::string history = render_history_list(user, used);
  const std::string candidates = render_candidate_list(cands);

  AssembledPrompt out;
  out.used_history_len = used;
  out.action = action;
  for (std::size_t i = 0; i < kNumPatterns; ++i) {
    std::string line = replace_once(sentences.text[i], kHistoryPlaceholder, history);
    line = replace_once(std::move(line), kCandidatePlaceholder, candidates);
    if (i) out.text += '\n';
    out.text += line;
  }
  return out;
}

AssembledPrompt assemble(const ActionCatalog& catalog, const UserRecord& user,
                         const CandidateSet& cands, const JointAction& action,
                         std::size_t l_t) {
  return render_prompt(select_sentences(catalog, action), user, cands, action, l_t);
}

RefineBlock::RefineBlock(std::shared_ptr<SentenceRefiner> refiner,
                         std::string instruction)
    : refiner_(std::move(refiner)), instruction_(std::move(instruction)) {
  if (!refiner_) throw invalid_argument("refine block needs a refiner");
}

std::string RefineBlock::refine_sentence(const std::string& sentence) {
  const std::string key = refiner_->model() + '\x1f' + sentence;
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    ++stats_.requests;
  }
  std::string reply;
  try {
    reply = refiner_->refine(instruction_, sentence);
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    ++stats_.failures;
    warnings_.push_back(std::string("refiner failed, keeping original: ") + e.what());
    return sentence;
  }
  // Collapse the reply onto one line; the prompt format is line-oriented.
  for (char& ch : reply) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  while (!reply.empty() && reply.back() == ' ') reply.pop_back();
  while (!reply.empty() && reply.front() == ' ') reply.erase(reply.begin());

  const bool keeps_placeholders =
      count_occurrences(reply, kHistoryPlaceholder) ==
          count_occurrences(sentence, kHistoryPlaceholder) &&
      count_occurrences(reply, kCandidatePlaceholder) ==
          count_occurrences(sentence, kCandidatePlaceholder) &&
      !has_unknown_placeholder(reply);
  std::lock_guard lock(mu_);
  if (reply.empty() || !keeps_placeholders) {
    ++stats_.placeholder_rejections;
    warnings_.push_back("refined sentence lost a placeholder, keeping original: " +
                        sentence);
    cache_[key] = sentence;
    return sentence;
  }
  cache_[key] = reply;
  return reply;
}

PromptSentences RefineBlock::refine(const PromptSentences& sentences) {
  PromptSentences out;
  for (std::size_t i = 0; i < kNumPatterns; ++i) {
    out.text[i] = refine_sentence(sentences.text[i]);
  }
  return out;
}

RefineStats RefineBlock::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::vector<std::string> RefineBlock::take_warnings() {
  std::lock_guard lock(mu_);
  return std::exchange(warnings_, {});
}

}  // namespace rpp
