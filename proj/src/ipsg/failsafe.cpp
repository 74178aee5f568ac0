#include "ipsg/error.hpp"
#include "ipsg/sim.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <set>
#include <vector>

namespace ipsg::sim {

namespace {

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const auto sp = line.find(' ', pos);
        out.push_back(line.substr(pos, sp == std::string_view::npos ? line.npos : sp - pos));
        if (sp == std::string_view::npos) break;
        pos = sp + 1;
    }
    return out;
}

std::int64_t number(std::string_view s, std::size_t lineno)
{
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
        throw TraceError("expected integer, got '" + std::string(s) + "'", lineno);
    }
    return v;
}

struct Frame {
    std::int64_t tick = -1;
    Point ball;
    std::vector<std::pair<std::string, Point>> bots;
};

}  // namespace

FailsafeVerdict check_failsafe(std::string_view trace, const std::map<std::string, std::int64_t, std::less<>>& ranges)
{
    std::vector<Frame> frames;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos < trace.size()) {
        ++lineno;
        auto nl = trace.find('\n', pos);
        if (nl == std::string_view::npos) nl = trace.size();
        const auto f = split(trace.substr(pos, nl - pos));
        pos = nl + 1;

        if (f[0] == "T") {
            if (f.size() != 5 || f[2] != "BALL") throw TraceError("malformed tick line", lineno);
            Frame fr;
            fr.tick = number(f[1], lineno);
            if (!frames.empty() && fr.tick != frames.back().tick + 1) throw TraceError("ticks must be consecutive", lineno);
            fr.ball = {number(f[3], lineno), number(f[4], lineno)};
            frames.push_back(std::move(fr));
        } else if (f[0] == "B") {
            if (f.size() != 8) throw TraceError("malformed bot line", lineno);
            if (frames.empty() || number(f[1], lineno) != frames.back().tick) {
                throw TraceError("bot line outside its tick", lineno);
            }
            const std::int64_t heading = number(f[5], lineno);
            if (heading < 0 || heading >= 360 || heading % 5 != 0) throw TraceError("bad heading", lineno);
            if (f[6] != "N" && f[6] != "D") throw TraceError("mode must be N or D", lineno);
            if (f[7] != "0" && f[7] != "1") throw TraceError("flag must be 0 or 1", lineno);
            if (!ranges.contains(f[2])) throw TraceError("no sensor range for bot '" + std::string(f[2]) + "'", lineno);
            frames.back().bots.emplace_back(std::string(f[2]), Point{number(f[3], lineno), number(f[4], lineno)});
        } else if (f[0] == "E") {
            if (f.size() != 5) throw TraceError("malformed event line", lineno);
            if (f[2] != "GRANT" && f[2] != "DISABLE" && f[2] != "RESUME" && f[2] != "FOLLOW_START") {
                throw TraceError("unknown event", lineno);
            }
        } else {
            throw TraceError("unknown trace line", lineno);
        }
    }
    if (frames.empty() || frames.front().bots.empty()) throw TraceError("trace has no initial bot positions");

    // Guarded region from the first frame's bot positions.
    std::int64_t lo_x = INT64_MAX, lo_y = INT64_MAX, hi_x = INT64_MIN, hi_y = INT64_MIN;
    std::set<std::string, std::less<>> roster;
    for (const auto& [id, p] : frames.front().bots) {
        const std::int64_t r = ranges.find(id)->second;
        lo_x = std::min(lo_x, p.x - r);
        lo_y = std::min(lo_y, p.y - r);
        hi_x = std::max(hi_x, p.x + r);
        hi_y = std::max(hi_y, p.y + r);
        roster.insert(id);
    }

    for (const auto& fr : frames) {
        if (fr.bots.size() != roster.size()) throw TraceError("tick " + std::to_string(fr.tick) + " lists a different set of bots");
        const Point b = fr.ball;
        if (b.x < lo_x || b.x > hi_x || b.y < lo_y || b.y > hi_y) continue;
        bool engaged = false;
        for (const auto& [id, p] : fr.bots) {
            const std::int64_t r = ranges.find(id)->second;
            const std::int64_t dx = b.x - p.x;
            const std::int64_t dy = b.y - p.y;
            if (dx * dx + dy * dy <= r * r) engaged = true;
        }
        if (!engaged) return {false, static_cast<std::uint64_t>(fr.tick)};
    }
    return {true, 0};
}

}  // namespace ipsg::sim
