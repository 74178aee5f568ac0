#pragma once

// Deterministic 2D guard-robot simulation. Bots guard a ball, follow it when an
// agent carries it away, and learn to trust the agent's token when the ball is
// brought back within 5% of its starting coordinates. A bot that sees a trusted
// token straight ahead disables itself until the token leaves its front sector.
//
// All geometry is integer millimetres; headings are multiples of 5 degrees,
// counter-clockwise from +x.

#include "ipsg/privilege.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ipsg::sim {

inline constexpr std::int64_t kMaxWorldSize = 1'000'000;
inline constexpr int kFollowTurnDeg = 45;
inline constexpr int kSearchTurnDeg = 5;
inline constexpr char kReturnedField[] = "returned";

struct Point {
    std::int64_t x = 0;
    std::int64_t y = 0;
    auto operator<=>(const Point&) const = default;
};

enum class Mode { Normal, Disabled };
enum class Sensed { Clear, Ball, UntrustedAgent, KnownEntity };
enum class Sector { None, Front, Left, Right };

const char* to_string(Sensed s) noexcept;

struct SimConfig {
    int default_distance = 10;      // forward steps per pursuit leg
    int step_mm = 25;
    int sector_half_angle_deg = 30;
    int min_compliant = 1;
};

struct BotState {
    std::string id;
    Point pos;
    Point initial_point;
    int heading = 0;
    bool flag = false;
    Mode mode = Mode::Normal;
    std::int64_t sensor_range = 200;
    int forward_budget = 0;
    int search_accum = 0;
    // Sector the ball was last seen in; a change resets both counters.
    Sector ball_sector = Sector::None;
};

enum class AgentActionKind { MoveBall, ReturnBall, ShowToken, HideToken, MoveTo };

struct AgentAction {
    AgentActionKind kind = AgentActionKind::MoveTo;
    Point target;         // MoveBall, MoveTo
    std::string bot_id;   // ShowToken
};

struct ScriptStep {
    std::uint64_t tick = 0;
    AgentAction action;
    std::size_t line = 0;  // scenario line, 0 when built in code
};

struct Agent {
    std::string id;
    Point pos;
    std::string feature;
    EntitySignature token;
    std::vector<ScriptStep> script;

    std::optional<std::string> shown_to;
    std::optional<Point> walk_target;
};

/// Signature of an agent token: SHA-256 of the feature string, kind AgentToken.
EntitySignature token_signature(std::string_view feature);

struct World {
    std::int64_t width = 0;
    std::int64_t height = 0;
    Point ball;
    Point guarded_initial_point;
    std::vector<BotState> bots;
    std::vector<Agent> agents;
    std::uint64_t tick = 0;
    std::uint64_t seed = 0;

    std::optional<std::size_t> carrier;     // agent index carrying the ball
    std::optional<Point> carry_target;
    std::optional<std::size_t> displacer;   // agent whose episode is open
    std::uint64_t displaced_tick = 0;

    const BotState* find_bot(std::string_view id) const;
};

struct Scenario {
    World world;
    SimConfig config;
    std::uint64_t ticks = 0;
};

/// Throws ScenarioError carrying the offending line number.
Scenario parse_scenario(std::string_view text, std::uint64_t seed = 0);

struct SenseResult {
    Sensed front = Sensed::Clear;
    Sensed left = Sensed::Clear;
    Sensed right = Sensed::Clear;
    // Token digest of the entity reported front when it is a KnownEntity.
    std::optional<Digest> front_entity;

    Sector ball_sector() const noexcept;
};

/// Nearest object per sector within sensor range. At equal distance a known
/// entity outranks the ball, which outranks an untrusted agent.
SenseResult sense(const BotState& bot, const World& world, const PrivilegeEngine& engine, const SimConfig& config = {});

enum class BotActionKind { Stay, Forward, TurnLeft, TurnRight };

struct BotAction {
    BotActionKind kind = BotActionKind::Stay;
    int amount = 0;  // mm for Forward, degrees for turns

    friend bool operator==(const BotAction&, const BotAction&) = default;
};

struct StepResult {
    BotAction action;
    bool disabled = false;      // entered Disabled this step
    bool resumed = false;       // left Disabled this step
    bool follow_started = false;
    bool returned = false;      // ball back in the window while following
};

/// One pass of the guard FSM. Updates the bot's flag, mode and counters; the
/// returned action has not been applied to pos/heading yet.
StepResult step_bot(BotState& bot, const SenseResult& sensed, const World& world, const SimConfig& config = {});

void apply_action(BotState& bot, const BotAction& action, const World& world);

/// Per-axis 20*|p - p0| <= p0. Throws DomainError unless both coordinates of
/// `initial` are positive.
bool within_return_window(Point initial, Point pos);

struct GrantEvent {
    std::uint64_t tick = 0;
    std::string bot_id;
    EntitySignature signature;
};

struct RunResult {
    std::string trace;
    std::vector<GrantEvent> grants;
};

/// Advances `world` by `ticks` steps and returns the trace, starting with the
/// tick 0 snapshot. Trust grants go through `engine` under the global scope.
RunResult run_scenario(World& world, const SimConfig& config, PrivilegeEngine& engine, std::uint64_t ticks);

/// Engine policy used by the simulator: returned == 1, min_compliant from config.
TrustPolicy sim_policy(const SimConfig& config);

struct FailsafeVerdict {
    bool holds = true;
    std::uint64_t first_tick = 0;  // when violated
};

/// Recomputes, from the trace alone plus each bot's sensor range, whether some
/// bot had the ball within range at every tick the ball was inside the guarded
/// region (bounding box of initial points grown by each bot's range).
/// Throws TraceError for malformed traces or bots without a range.
FailsafeVerdict check_failsafe(std::string_view trace, const std::map<std::string, std::int64_t, std::less<>>& ranges);

std::map<std::string, std::int64_t, std::less<>> sensor_ranges(const World& world);

}  // namespace ipsg::sim
