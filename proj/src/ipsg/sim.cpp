#include "ipsg/sim.hpp"

#include "ipsg/error.hpp"

#include <cmath>
#include <sstream>

namespace ipsg::sim {

namespace {

using Wide = __int128;

// sin(d degrees) * 1e9, rounded, d = 0..90. Integer trig keeps traces
// identical across libm implementations.
constexpr std::int64_t kSinTable[91] = {
    0, 17452406, 34899497, 52335956, 69756474, 87155743,
    104528463, 121869343, 139173101, 156434465, 173648178, 190808995,
    207911691, 224951054, 241921896, 258819045, 275637356, 292371705,
    309016994, 325568154, 342020143, 358367950, 374606593, 390731128,
    406736643, 422618262, 438371147, 453990500, 469471563, 484809620,
    500000000, 515038075, 529919264, 544639035, 559192903, 573576436,
    587785252, 601815023, 615661475, 629320391, 642787610, 656059029,
    669130606, 681998360, 694658370, 707106781, 719339800, 731353702,
    743144825, 754709580, 766044443, 777145961, 788010754, 798635510,
    809016994, 819152044, 829037573, 838670568, 848048096, 857167301,
    866025404, 874619707, 882947593, 891006524, 898794046, 906307787,
    913545458, 920504853, 927183855, 933580426, 939692621, 945518576,
    951056516, 956304756, 961261696, 965925826, 970295726, 974370065,
    978147601, 981627183, 984807753, 987688341, 990268069, 992546152,
    994521895, 996194698, 997564050, 998629535, 999390827, 999847695,
    1000000000,
};
constexpr std::int64_t kTrigScale = 1'000'000'000;

std::int64_t sin_deg(int deg)
{
    deg = ((deg % 360) + 360) % 360;
    if (deg <= 90) return kSinTable[deg];
    if (deg <= 180) return kSinTable[180 - deg];
    if (deg <= 270) return -kSinTable[deg - 180];
    return -kSinTable[360 - deg];
}

std::int64_t cos_deg(int deg) { return sin_deg(deg + 90); }

// Round-half-away-from-zero of value / kTrigScale.
std::int64_t descale(Wide value)
{
    const Wide half = kTrigScale / 2;
    return static_cast<std::int64_t>(value >= 0 ? (value + half) / kTrigScale : -((-value + half) / kTrigScale));
}

std::int64_t dist2(Point a, Point b)
{
    const std::int64_t dx = b.x - a.x;
    const std::int64_t dy = b.y - a.y;
    return dx * dx + dy * dy;
}

Point clamp_to(const World& w, Point p)
{
    return {std::clamp<std::int64_t>(p.x, 0, w.width), std::clamp<std::int64_t>(p.y, 0, w.height)};
}

// Moves at most `step` mm from `from` toward `to`; sqrt and division are
// correctly rounded in IEEE arithmetic, so the result is reproducible.
Point advance(Point from, Point to, std::int64_t step)
{
    const std::int64_t d2 = dist2(from, to);
    if (d2 <= step * step) return to;
    const double d = std::sqrt(static_cast<double>(d2));
    const double k = static_cast<double>(step) / d;
    return {from.x + std::llround(static_cast<double>(to.x - from.x) * k),
            from.y + std::llround(static_cast<double>(to.y - from.y) * k)};
}

Sector sector_of(const BotState& bot, Point target, int half_angle)
{
    const Wide dx = target.x - bot.pos.x;
    const Wide dy = target.y - bot.pos.y;
    const Wide d2 = dx * dx + dy * dy;
    if (d2 == 0) return Sector::Front;
    const Wide c = cos_deg(bot.heading);
    const Wide s = sin_deg(bot.heading);
    const Wide dot = dx * c + dy * s;
    if (dot < 0) return Sector::None;  // behind
    const Wide ch = cos_deg(half_angle);
    if (dot * dot >= d2 * ch * ch) return Sector::Front;
    const Wide cross = c * dy - s * dx;
    return cross > 0 ? Sector::Left : Sector::Right;
}

int rank(Sensed s)
{
    switch (s) {
    case Sensed::KnownEntity: return 0;
    case Sensed::Ball: return 1;
    case Sensed::UntrustedAgent: return 2;
    case Sensed::Clear: return 3;
    }
    return 3;
}

struct Candidate {
    Sensed what = Sensed::Clear;
    std::int64_t d2 = 0;
    std::optional<Digest> digest;

    bool beats(const Candidate& other) const
    {
        if (other.what == Sensed::Clear) return true;
        if (d2 != other.d2) return d2 < other.d2;
        return rank(what) < rank(other.what);
    }
};

void offer(Candidate& slot, const Candidate& c)
{
    if (c.beats(slot)) slot = c;
}

}  // namespace

const char* to_string(Sensed s) noexcept
{
    switch (s) {
    case Sensed::Clear: return "Clear";
    case Sensed::Ball: return "Ball";
    case Sensed::UntrustedAgent: return "UntrustedAgent";
    case Sensed::KnownEntity: return "KnownEntity";
    }
    return "?";
}

EntitySignature token_signature(std::string_view feature)
{
    std::string label(feature.substr(0, kMaxLabelLength));
    return EntitySignature{sha256(feature), SignatureKind::AgentToken, std::move(label)};
}

const BotState* World::find_bot(std::string_view id) const
{
    for (const auto& b : bots) {
        if (b.id == id) return &b;
    }
    return nullptr;
}

Sector SenseResult::ball_sector() const noexcept
{
    if (front == Sensed::Ball) return Sector::Front;
    if (left == Sensed::Ball) return Sector::Left;
    if (right == Sensed::Ball) return Sector::Right;
    return Sector::None;
}

SenseResult sense(const BotState& bot, const World& world, const PrivilegeEngine& engine, const SimConfig& config)
{
    Candidate front, left, right;
    const std::int64_t range2 = bot.sensor_range * bot.sensor_range;

    auto consider = [&](Point where, Candidate c) {
        c.d2 = dist2(bot.pos, where);
        if (c.d2 > range2) return;
        switch (sector_of(bot, where, config.sector_half_angle_deg)) {
        case Sector::Front: offer(front, c); break;
        case Sector::Left: offer(left, c); break;
        case Sector::Right: offer(right, c); break;
        case Sector::None: break;
        }
    };

    consider(world.ball, Candidate{Sensed::Ball, 0, std::nullopt});
    for (const auto& agent : world.agents) {
        const bool known = agent.shown_to == bot.id && engine.is_trusted(agent.token, Scope::global());
        consider(agent.pos, known ? Candidate{Sensed::KnownEntity, 0, agent.token.digest}
                                  : Candidate{Sensed::UntrustedAgent, 0, std::nullopt});
    }

    SenseResult r;
    r.front = front.what;
    r.left = left.what;
    r.right = right.what;
    if (front.what == Sensed::KnownEntity) r.front_entity = front.digest;
    return r;
}

bool within_return_window(Point initial, Point pos)
{
    if (initial.x <= 0 || initial.y <= 0) throw DomainError("return window needs a positive initial point");
    const auto dx = pos.x > initial.x ? pos.x - initial.x : initial.x - pos.x;
    const auto dy = pos.y > initial.y ? pos.y - initial.y : initial.y - pos.y;
    return Wide{20} * dx <= initial.x && Wide{20} * dy <= initial.y;
}

StepResult step_bot(BotState& bot, const SenseResult& sensed, const World& world, const SimConfig& config)
{
    StepResult r;
    if (sensed.front == Sensed::KnownEntity) {
        if (bot.mode == Mode::Normal) {
            bot.mode = Mode::Disabled;
            r.disabled = true;
        }
        return r;
    }
    if (bot.mode == Mode::Disabled) {
        bot.mode = Mode::Normal;
        r.resumed = true;
    }

    const Sector sector = sensed.ball_sector();
    if (sector != bot.ball_sector) {
        bot.forward_budget = 0;
        bot.search_accum = 0;
        bot.ball_sector = sector;
    }

    if (sector == Sector::None) {
        if (bot.flag) {
            r.action = {BotActionKind::TurnLeft, kSearchTurnDeg};
            bot.search_accum += kSearchTurnDeg;
            if (bot.search_accum >= 360) bot.search_accum = 0;
        }
        return r;
    }

    // The flag marks pursuit of a displaced ball; a ball still inside the
    // return window is being guarded, not followed.
    const bool displaced = !within_return_window(world.guarded_initial_point, world.ball);
    if (sector == Sector::Front && bot.flag && !displaced) {
        bot.flag = false;
        r.returned = true;
        return r;
    }
    if (displaced && !bot.flag) {
        bot.flag = true;
        r.follow_started = true;
    }

    switch (sector) {
    case Sector::Left: r.action = {BotActionKind::TurnLeft, kFollowTurnDeg}; break;
    case Sector::Right: r.action = {BotActionKind::TurnRight, kFollowTurnDeg}; break;
    case Sector::Front:
        // Keep two steps of standoff so a pursuing bot never overruns the ball.
        if (displaced && bot.forward_budget < config.default_distance &&
            dist2(bot.pos, world.ball) > 4 * std::int64_t{config.step_mm} * config.step_mm) {
            r.action = {BotActionKind::Forward, config.step_mm};
            ++bot.forward_budget;
        }
        break;
    case Sector::None: break;
    }
    return r;
}

void apply_action(BotState& bot, const BotAction& action, const World& world)
{
    switch (action.kind) {
    case BotActionKind::Stay: break;
    case BotActionKind::Forward: {
        const Point delta{descale(Wide{action.amount} * cos_deg(bot.heading)),
                          descale(Wide{action.amount} * sin_deg(bot.heading))};
        bot.pos = clamp_to(world, {bot.pos.x + delta.x, bot.pos.y + delta.y});
        break;
    }
    case BotActionKind::TurnLeft: bot.heading = ((bot.heading + action.amount) % 360 + 360) % 360; break;
    case BotActionKind::TurnRight: bot.heading = ((bot.heading - action.amount) % 360 + 360) % 360; break;
    }
}

TrustPolicy sim_policy(const SimConfig& config)
{
    TrustPolicy policy;
    policy.rule = ComplianceRule({Predicate{kReturnedField, Predicate::Equals{std::int64_t{1}}}});
    policy.min_compliant = static_cast<std::uint32_t>(config.min_compliant);
    return policy;
}

namespace {

void apply_script(World& w, std::uint64_t tick)
{
    for (std::size_t i = 0; i < w.agents.size(); ++i) {
        Agent& agent = w.agents[i];
        for (const auto& step : agent.script) {
            if (step.tick != tick) continue;
            const AgentAction& a = step.action;
            switch (a.kind) {
            case AgentActionKind::MoveBall:
            case AgentActionKind::ReturnBall:
                agent.pos = w.ball;
                agent.walk_target.reset();
                w.carrier = i;
                if (a.kind == AgentActionKind::MoveBall) {
                    w.carry_target = a.target;
                    w.displacer = i;
                    w.displaced_tick = tick;
                } else {
                    w.carry_target = w.guarded_initial_point;
                }
                break;
            case AgentActionKind::ShowToken: agent.shown_to = a.bot_id; break;
            case AgentActionKind::HideToken: agent.shown_to.reset(); break;
            case AgentActionKind::MoveTo:
                if (w.carrier == i) {
                    w.carrier.reset();
                    w.carry_target.reset();
                }
                agent.walk_target = a.target;
                break;
            }
        }
    }
}

void move_carried(World& w, std::int64_t step)
{
    if (w.carrier && w.carry_target) {
        w.ball = advance(w.ball, *w.carry_target, step);
        w.agents[*w.carrier].pos = w.ball;
        if (w.ball == *w.carry_target) {
            w.carrier.reset();
            w.carry_target.reset();
        }
    }
    for (auto& agent : w.agents) {
        if (!agent.walk_target) continue;
        agent.pos = advance(agent.pos, *agent.walk_target, step);
        if (agent.pos == *agent.walk_target) agent.walk_target.reset();
    }
}

void snapshot(std::ostream& out, const World& w)
{
    out << "T " << w.tick << " BALL " << w.ball.x << ' ' << w.ball.y << '\n';
    for (const auto& b : w.bots) {
        out << "B " << w.tick << ' ' << b.id << ' ' << b.pos.x << ' ' << b.pos.y << ' ' << b.heading << ' '
            << (b.mode == Mode::Normal ? 'N' : 'D') << ' ' << (b.flag ? '1' : '0') << '\n';
    }
}

void event(std::ostream& out, std::uint64_t tick, std::string_view what, const std::string& bot,
           const std::optional<Digest>& digest)
{
    out << "E " << tick << ' ' << what << ' ' << bot << ' ' << (digest ? digest->hex() : "-") << '\n';
}

}  // namespace

RunResult run_scenario(World& world, const SimConfig& config, PrivilegeEngine& engine, std::uint64_t ticks)
{
    if (ticks == 0) throw InvalidArgument("tick count must be positive");
    for (const auto& agent : world.agents) {
        for (const auto& step : agent.script) {
            if (step.action.kind == AgentActionKind::ShowToken && world.find_bot(step.action.bot_id) == nullptr) {
                throw ScenarioError("agent '" + agent.id + "' shows its token to unknown bot '" + step.action.bot_id +
                                        "'",
                                    step.line);
            }
        }
    }

    RunResult result;
    std::ostringstream trace;
    snapshot(trace, world);

    const std::uint64_t end = world.tick + ticks;
    while (world.tick < end) {
        const std::uint64_t t = ++world.tick;
        apply_script(world, t);

        std::ostringstream events;
        for (auto& bot : world.bots) {
            const SenseResult sensed = sense(bot, world, engine, config);
            const StepResult step = step_bot(bot, sensed, world, config);
            if (step.disabled) event(events, t, "DISABLE", bot.id, sensed.front_entity);
            if (step.resumed) event(events, t, "RESUME", bot.id, std::nullopt);
            if (step.follow_started) event(events, t, "FOLLOW_START", bot.id, std::nullopt);
            if (step.returned && world.displacer) {
                const EntitySignature& token = world.agents[*world.displacer].token;
                const bool was_trusted = engine.is_trusted(token, Scope::global());
                Episode ep{token, Scope::global(), {{kReturnedField, std::int64_t{1}}}, world.displaced_tick, t};
                const TrustDecision d = engine.record_outcome(ep);
                if (d.kind == TrustDecision::Kind::Granted && !was_trusted) {
                    event(events, t, "GRANT", bot.id, token.digest);
                    result.grants.push_back({t, bot.id, token});
                }
                world.displacer.reset();
            }
            apply_action(bot, step.action, world);
        }
        move_carried(world, config.step_mm);

        snapshot(trace, world);
        trace << events.str();
    }
    result.trace = trace.str();
    return result;
}

std::map<std::string, std::int64_t, std::less<>> sensor_ranges(const World& world)
{
    std::map<std::string, std::int64_t, std::less<>> out;
    for (const auto& b : world.bots) out.emplace(b.id, b.sensor_range);
    return out;
}

}  // namespace ipsg::sim
