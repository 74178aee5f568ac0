#include "ipsg/error.hpp"
#include "ipsg/sim.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

namespace ipsg::sim {

namespace {

class LineParser {
public:
    LineParser(std::vector<std::string> tokens, std::size_t line) : tokens_(std::move(tokens)), line_(line) {}

    const std::string& word(std::size_t i) const
    {
        if (i >= tokens_.size()) fail("missing argument " + std::to_string(i) + " for " + tokens_[0]);
        return tokens_[i];
    }

    std::int64_t integer(std::size_t i) const
    {
        const auto& s = word(i);
        std::int64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail("expected integer, got '" + s + "'");
        return v;
    }

    void expect_count(std::size_t n) const
    {
        if (tokens_.size() != n) {
            fail(tokens_[0] + " takes " + std::to_string(n - 1) + " arguments, got " + std::to_string(tokens_.size() - 1));
        }
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ScenarioError(msg, line_); }

    std::size_t line() const { return line_; }

private:
    std::vector<std::string> tokens_;
    std::size_t line_;
};

void check_id(const LineParser& p, const std::string& id, std::set<std::string>& ids)
{
    if (id.size() > 32) p.fail("id too long: '" + id + "'");
    if (!ids.insert(id).second) p.fail("duplicate id '" + id + "'");
}

Point position(const LineParser& p, std::size_t i, const World& w)
{
    const Point pt{p.integer(i), p.integer(i + 1)};
    if (pt.x < 0 || pt.y < 0 || pt.x > w.width || pt.y > w.height) {
        p.fail("position (" + std::to_string(pt.x) + ", " + std::to_string(pt.y) + ") outside the world");
    }
    return pt;
}

struct PendingStep {
    std::string agent;
    ScriptStep step;
};

}  // namespace

Scenario parse_scenario(std::string_view text, std::uint64_t seed)
{
    Scenario sc;
    World& w = sc.world;
    w.seed = seed;

    bool have_world = false;
    bool have_ball = false;
    bool have_end = false;
    std::set<std::string> ids;
    std::vector<PendingStep> steps;

    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::vector<std::string> tokens;
        for (std::string t; ls >> t;) tokens.push_back(t);
        if (tokens.empty()) continue;

        const LineParser p(tokens, lineno);
        const std::string& kw = tokens[0];
        if (have_end) p.fail("directive after END");
        if (!have_world && kw != "WORLD") p.fail("WORLD must be the first directive");

        if (kw == "WORLD") {
            if (have_world) p.fail("duplicate WORLD");
            p.expect_count(3);
            w.width = p.integer(1);
            w.height = p.integer(2);
            if (w.width <= 0 || w.height <= 0 || w.width > kMaxWorldSize || w.height > kMaxWorldSize) {
                p.fail("world dimensions must be in 1.." + std::to_string(kMaxWorldSize));
            }
            have_world = true;
        } else if (kw == "BALL") {
            if (have_ball) p.fail("duplicate BALL");
            p.expect_count(3);
            w.ball = position(p, 1, w);
            if (w.ball.x <= 0 || w.ball.y <= 0) p.fail("ball coordinates must be positive");
            w.guarded_initial_point = w.ball;
            have_ball = true;
        } else if (kw == "BOT") {
            p.expect_count(6);
            BotState bot;
            bot.id = tokens[1];
            check_id(p, bot.id, ids);
            bot.pos = position(p, 2, w);
            bot.initial_point = bot.pos;
            const auto heading = p.integer(4);
            if (heading < 0 || heading >= 360 || heading % 5 != 0) p.fail("heading must be a multiple of 5 in 0..355");
            bot.heading = static_cast<int>(heading);
            bot.sensor_range = p.integer(5);
            if (bot.sensor_range <= 0 || bot.sensor_range > kMaxWorldSize) p.fail("sensor range must be positive");
            w.bots.push_back(std::move(bot));
        } else if (kw == "AGENT") {
            p.expect_count(6);
            Agent agent;
            agent.id = tokens[1];
            check_id(p, agent.id, ids);
            agent.pos = position(p, 2, w);
            if (tokens[4] != "TOKEN") p.fail("expected TOKEN after agent position");
            agent.feature = tokens[5];
            agent.token = token_signature(agent.feature);
            w.agents.push_back(std::move(agent));
        } else if (kw == "CONFIG") {
            p.expect_count(3);
            const auto& name = tokens[1];
            const auto v = p.integer(2);
            auto in_range = [&](std::int64_t lo, std::int64_t hi) {
                if (v < lo || v > hi) p.fail(name + " must be in " + std::to_string(lo) + ".." + std::to_string(hi));
                return static_cast<int>(v);
            };
            if (name == "default_distance") sc.config.default_distance = in_range(0, 1'000'000);
            else if (name == "step_mm") sc.config.step_mm = in_range(1, 10'000);
            else if (name == "sector_half_angle_deg") sc.config.sector_half_angle_deg = in_range(1, 89);
            else if (name == "min_compliant") sc.config.min_compliant = in_range(1, 1'000'000);
            else p.fail("unknown CONFIG '" + name + "'");
        } else if (kw == "AT") {
            PendingStep ps;
            const auto tick = p.integer(1);
            if (tick < 1) p.fail("script ticks start at 1");
            ps.step.tick = static_cast<std::uint64_t>(tick);
            ps.step.line = lineno;
            ps.agent = p.word(2);
            const auto& action = p.word(3);
            AgentAction& a = ps.step.action;
            if (action == "MOVE_BALL" || action == "MOVE_TO") {
                p.expect_count(6);
                a.kind = action == "MOVE_BALL" ? AgentActionKind::MoveBall : AgentActionKind::MoveTo;
                a.target = position(p, 4, w);
            } else if (action == "RETURN_BALL") {
                p.expect_count(4);
                a.kind = AgentActionKind::ReturnBall;
            } else if (action == "SHOW_TOKEN") {
                p.expect_count(5);
                a.kind = AgentActionKind::ShowToken;
                a.bot_id = tokens[4];
            } else if (action == "HIDE_TOKEN") {
                p.expect_count(4);
                a.kind = AgentActionKind::HideToken;
            } else {
                p.fail("unknown agent action '" + action + "'");
            }
            steps.push_back(std::move(ps));
        } else if (kw == "END") {
            p.expect_count(2);
            const auto ticks = p.integer(1);
            if (ticks < 1) p.fail("END needs a positive tick count");
            sc.ticks = static_cast<std::uint64_t>(ticks);
            have_end = true;
        } else {
            p.fail("unknown directive '" + kw + "'");
        }
    }

    const std::size_t last = lineno == 0 ? 1 : lineno;
    if (!have_world) throw ScenarioError("missing WORLD", last);
    if (!have_ball) throw ScenarioError("missing BALL", last);
    if (w.bots.empty()) throw ScenarioError("at least one BOT is required", last);
    if (!have_end) throw ScenarioError("missing END", last);

    for (auto& ps : steps) {
        auto agent = std::find_if(w.agents.begin(), w.agents.end(), [&](const Agent& a) { return a.id == ps.agent; });
        if (agent == w.agents.end()) throw ScenarioError("unknown agent '" + ps.agent + "'", ps.step.line);
        if (ps.step.action.kind == AgentActionKind::ShowToken && w.find_bot(ps.step.action.bot_id) == nullptr) {
            throw ScenarioError("unknown bot '" + ps.step.action.bot_id + "'", ps.step.line);
        }
        if (!agent->script.empty() && agent->script.back().tick >= ps.step.tick) {
            throw ScenarioError("script ticks must be strictly increasing per agent", ps.step.line);
        }
        agent->script.push_back(std::move(ps.step));
    }
    return sc;
}

}  // namespace ipsg::sim
