#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "socsim/domain.hpp"
#include "socsim/llm.hpp"
#include "socsim/rng.hpp"
#include "socsim/templates.hpp"

namespace socsim {

struct VisibilityFlags {
  bool show_social_stats = true;
  bool show_biographies = true;

  friend bool operator==(const VisibilityFlags&, const VisibilityFlags&) = default;
};

/// Everything an agent is shown when deciding.
struct AgentView {
  UserId user_id{};
  Persona persona;
  Timeline timeline;
  std::vector<NewsItem> headlines;
  std::vector<std::string> own_recent_posts;
  VisibilityFlags visibility;
};

enum class ActionKind { Post, Repost };

std::string_view to_string(ActionKind kind);

struct ActionDecision {
  ActionKind action = ActionKind::Post;
  std::string post_text;                        // iff Post
  std::optional<std::int64_t> chosen_headline;  // NewsItem::item_id, iff Post
  std::optional<PostId> repost_target;          // iff Repost
  std::optional<UserId> follow_target;
  std::string reasoning;

  friend bool operator==(const ActionDecision&, const ActionDecision&) = default;
};

enum class FailureKind {
  MalformedJson,
  UnknownAction,
  MissingField,
  DanglingReference,
  IneligibleTarget,
};

std::string_view to_string(FailureKind kind);

struct DecisionFailure {
  FailureKind kind;
  std::string detail;
};

/// Checks the conditional-field rules and that every reference points into
/// the view (repost target on the timeline and not yet reposted, follow
/// target a timeline author the agent does not follow yet).
std::optional<DecisionFailure> check_decision(const ActionDecision& d, const AgentView& view);

using ParseResult = std::variant<ActionDecision, DecisionFailure>;

/// Parses a model answer. Headlines and timeline posts are referred to by
/// the numbers shown in the prompt; follow targets by handle (or by post
/// number).
ParseResult parse_decision(std::string_view raw, const AgentView& view);

struct Skip {
  std::string cause;
};

using DecisionOutcome = std::variant<ActionDecision, Skip>;

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual DecisionOutcome decide(const AgentView& view, Rng& rng) = 0;
};

struct LlmAgentSettings {
  std::string model = "gpt-4o-mini";
  double temperature = 1.0;
  int max_tokens = 400;
  int max_attempts = 3;
};

/// Renders the chat request for a view. Pure: equal views give identical
/// requests.
ChatRequest build_prompt(const AgentView& view, const LlmAgentSettings& settings = {},
                         const PromptTemplates& templates = PromptTemplates::defaults());

struct LlmDecision {
  DecisionOutcome outcome;
  int attempts = 0;
};

/// build_prompt -> chat -> parse_decision, re-asking with the parse failure
/// appended up to `max_attempts` times. Transport failures become a Skip;
/// CacheMissError propagates so that replay runs never diverge silently.
LlmDecision llm_decide(const AgentView& view, LlmClient& llm, const LlmAgentSettings& settings,
                       const PromptTemplates& templates = PromptTemplates::defaults());

class LlmBackend final : public AgentBackend {
 public:
  LlmBackend(LlmClient& llm, LlmAgentSettings settings,
             const PromptTemplates& templates = PromptTemplates::defaults())
      : llm_(llm), settings_(std::move(settings)), templates_(templates) {}

  DecisionOutcome decide(const AgentView& view, Rng& rng) override;

 private:
  LlmClient& llm_;
  LlmAgentSettings settings_;
  PromptTemplates templates_;
};

/// Parameters of the scripted backend.
struct StubParams {
  double homophily = 0.9;        // h in [0, 1]
  double engagement_bias = 1.0;  // b >= 0
  double follow_rate = 0.12;     // f in [0, 1]
  double post_rate = 0.05;       // q in [0, 1]

  friend bool operator==(const StubParams&, const StubParams&) = default;
};

/// Weight of each timeline entry (in `Timeline::at` order):
/// (1 + reposts)^b * (1 + h * [same party as the viewer]).
std::vector<double> stub_weights(const AgentView& view, const StubParams& params);

/// Posts with probability q (always when nothing is repostable), otherwise
/// reposts an entry chosen in proportion to `stub_weights`; with probability
/// f follows the author of the heaviest entry if that author is eligible.
ActionDecision stub_decide(const AgentView& view, const StubParams& params, Rng& rng);

class StubBackend final : public AgentBackend {
 public:
  explicit StubBackend(StubParams params) : params_(params) {}
  DecisionOutcome decide(const AgentView& view, Rng& rng) override {
    return stub_decide(view, params_, rng);
  }

 private:
  StubParams params_;
};

}  // namespace socsim
