// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "fcdnp/error.hpp"
#include "fcdnp/sequencer.hpp"

using namespace fcdnp;

namespace {

std::set<ViolationKind> kinds(ValidationReport const& r)
{
    std::set<ViolationKind> k;
    for (auto const& v : r.violations)
        k.insert(v.kind);
    return k;
}

// Naive unroller used as the compile oracle.
void unroll(std::vector<Statement> const& body, std::uint64_t base, std::vector<Event>& out)
{
    for (auto const& st : body)
    {
        if (auto const* e = std::get_if<EdgeStmt>(&st.node))
        {
            out.push_back({base + e->at_ns, e->ch, e->action});
            continue;
        }
        auto const& l = std::get<LoopStmt>(st.node);
        for (std::uint64_t i = 0; i < l.count; ++i)
            unroll(l.body, base + l.at_ns + i * l.period_ns, out);
    }
}

}  // namespace

TEST_SUITE("sequencer")
{
    TEST_CASE("canonical print/parse is a fixpoint")
    {
        std::string const text = "# comment\nat 0 LASER on ; at 5 LASER off\n"
                                 "at 10 loop 3 period 100 {\n at 0 RF on\n at 50 RF off\n"
                                 "  loop 2 period 20 { at 60 ACQ on; at 70 ACQ off }\n}\n";
        auto const p1 = parse_program(text);
        std::string const c1 = print_program(p1);
        auto const p2 = parse_program(c1);
        CHECK(p1 == p2);
        CHECK(print_program(p2) == c1);
    }

    TEST_CASE("parse errors carry line and column")
    {
        try
        {
            parse_program("at 0 LASER on\nat 5 FOO on\n");
            FAIL("expected ParseError");
        }
        catch (ParseError const& e)
        {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).find("unknown channel 'FOO'") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_program("at -5 RF on"), ParseError);
        CHECK_THROWS_AS(parse_program("at 1.5 RF on"), ParseError);
        CHECK_THROWS_AS(parse_program("loop 2 period 10 { at 0 RF on"), ParseError);
    }

    TEST_CASE("lazy stream equals the naive unrolled oracle")
    {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 50; ++trial)
        {
            PulseProgram p;
            std::uniform_int_distribution<std::uint64_t> t(0, 5000), cnt(1, 20), per(1, 400);
            std::uniform_int_distribution<int> ch(0, 4), act(0, 1);
            for (int i = 0; i < 4; ++i)
                p.statements.push_back({EdgeStmt{t(rng), Channel(ch(rng)), Action(act(rng))}});
            LoopStmt l{t(rng), cnt(rng), per(rng), {}};
            for (int i = 0; i < 3; ++i)
                l.body.push_back({EdgeStmt{t(rng) % 600, Channel(ch(rng)), Action(act(rng))}});
            LoopStmt inner{t(rng) % 100, cnt(rng), per(rng), {}};
            inner.body.push_back({EdgeStmt{0, Channel::acq, Action::on}});
            l.body.push_back({inner});
            p.statements.push_back({l});

            std::vector<Event> want;
            unroll(p.statements, 0, want);
            std::stable_sort(want.begin(), want.end(), event_before);
            auto const s = compile_unchecked(p);
            auto const got = s.materialize();
            REQUIRE(got.size() == want.size());
            CHECK(s.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i)
            {
                CHECK(got[i].t_ns == want[i].t_ns);
                if (i > 0)
                    CHECK_FALSE(event_before(got[i], got[i - 1]));
            }
        }
    }

    TEST_CASE("each violation class is detected")
    {
        auto rf_acq = parse_program("at 0 RF on; at 100 ACQ on; at 200 RF off; at 300 ACQ off");
        CHECK(kinds(validate(rf_acq)) == std::set{ViolationKind::rf_acq_overlap});

        auto shuttle = parse_program(
            "at 0 ACQ on; at 10 SHUTTLE on; at 20 SHUTTLE off; at 30 ACQ off");
        CHECK(kinds(validate(shuttle)) == std::set{ViolationKind::shuttle_during_acq});

        auto unmatched = parse_program("at 0 LASER off");
        CHECK(kinds(validate(unmatched)) == std::set{ViolationKind::unmatched_edge});
        auto dangling = parse_program("at 0 MW on");
        CHECK(kinds(validate(dangling)) == std::set{ViolationKind::unmatched_edge});

        auto overrun = parse_program("loop 2 period 100 { at 0 MW on; at 150 MW off }");
        CHECK(kinds(validate(overrun)).contains(ViolationKind::loop_overrun));

        auto ok = build_spinlock_program(1000, 68000, 75000, 69000, 74000);
        CHECK(validate(ok).ok());
        CHECK_THROWS_AS(compile(overrun), ValidationError);
    }

    TEST_CASE("adjacent RF and ACQ intervals do not overlap")
    {
        auto p = parse_program("at 0 RF on; at 100 RF off; at 100 ACQ on; at 200 ACQ off");
        CHECK(validate(p).ok());
    }

    TEST_CASE("spin-lock builder rejects bad geometry")
    {
        CHECK_THROWS_AS(build_spinlock_program(10, 70000, 75000, 69000, 74000), ValidationError);
        CHECK_THROWS_AS(build_spinlock_program(10, 68000, 75000, 69000, 76000), ValidationError);
    }

    TEST_CASE("large programs compile lazily")
    {
        auto p = build_spinlock_program(10'000'000, 68000, 75000, 69000, 74000);
        auto const s = compile(p);
        CHECK(s.size() == 40'000'000);
        CHECK(s.duration_ns() == 750'000'000'000ULL);
        auto r = s.reader();
        Event e;
        std::uint64_t n = 0;
        while (n < 1000 && r.next(e))
            ++n;
        CHECK(n == 1000);
    }

    TEST_CASE("event log round trip and bad magic")
    {
        auto p = parse_program("at 0 LASER on; at 7 LASER off; loop 3 period 10 { at 1 RF on; at 2 RF off }");
        auto const s = compile(p);
        std::stringstream ss;
        write_event_log(ss, s);
        CHECK(ss.str().substr(0, 4) == "FCEV");
        CHECK(read_event_log(ss) == s.materialize());

        std::stringstream bad("FCWR\x01\x00");
        CHECK_THROWS_WITH_AS(read_event_log(bad), doctest::Contains("bad magic"), VersionError);
        std::string v2 = "FCEV";
        v2 += '\x02';
        v2 += '\x00';
        std::stringstream ver(v2);
        CHECK_THROWS_AS(read_event_log(ver), VersionError);
    }
}
