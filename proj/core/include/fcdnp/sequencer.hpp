// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
//! \file fcdnp/sequencer.hpp
//! Multi-channel TTL pulse programs on a 1 ns grid.
//!
//! Text form, one statement per line (or separated by ';'):
//!
//!     # 60 s of optical pumping, then a spin-lock train
//!     at 0 LASER on
//!     at 60000000000 LASER off
//!     at 61000000000 loop 800000 period 75000 {
//!       at 0 RF on
//!       at 68000 RF off
//!     }
//!
//! Times are non-negative integer nanoseconds. Inside a loop they are
//! relative to the start of the iteration.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fcdnp {

enum class Channel : std::uint8_t
{
    laser,
    mw,
    shuttle,
    rf,
    acq,
};
inline constexpr int channel_count = 5;

enum class Action : std::uint8_t
{
    off = 0,
    on = 1,
};

std::string_view to_string(Channel ch);
std::string_view to_string(Action a);
std::optional<Channel> channel_from_string(std::string_view name);

struct Statement;

struct EdgeStmt
{
    std::uint64_t at_ns = 0;
    Channel ch = Channel::laser;
    Action action = Action::off;

    bool operator==(EdgeStmt const&) const = default;
};

struct LoopStmt
{
    std::uint64_t at_ns = 0;
    std::uint64_t count = 1;
    std::uint64_t period_ns = 1;
    std::vector<Statement> body;

    bool operator==(LoopStmt const&) const;
};

struct Statement
{
    std::variant<EdgeStmt, LoopStmt> node;

    bool operator==(Statement const&) const = default;
};

struct PulseProgram
{
    std::vector<Statement> statements;

    bool operator==(PulseProgram const&) const = default;
};

//! Throws ParseError with 1-based line and column.
PulseProgram parse_program(std::string_view text);
//! Canonical text: one statement per line, two-space indentation.
std::string print_program(PulseProgram const& program);

struct Event
{
    std::uint64_t t_ns = 0;
    Channel ch = Channel::laser;
    Action action = Action::off;

    bool operator==(Event const&) const = default;
};

//! Stream order: time, then off before on, then channel.
inline bool event_before(Event const& a, Event const& b)
{
    if (a.t_ns != b.t_ns)
        return a.t_ns < b.t_ns;
    if (a.action != b.action)
        return a.action == Action::off;
    return a.ch < b.ch;
}

namespace detail {
struct CompiledBlock;
class BlockCursor;
}  // namespace detail

//! Pull-based reader over a compiled stream; memory does not depend on
//! loop counts.
class EventReader
{
  public:
    explicit EventReader(std::shared_ptr<detail::CompiledBlock const> root);
    EventReader(EventReader&&) noexcept;
    EventReader& operator=(EventReader&&) noexcept;
    ~EventReader();

    //! Writes the next event and returns true, or returns false at the end.
    bool next(Event& out);

  private:
    std::shared_ptr<detail::CompiledBlock const> root_;
    std::unique_ptr<detail::BlockCursor> cursor_;
};

//! Immutable, lazily unrolled event stream.
class EventStream
{
  public:
    EventStream();

    EventReader reader() const { return EventReader(root_); }
    //! Number of events, from loop arithmetic.
    std::uint64_t size() const { return size_; }
    //! End of the last event or loop period, whichever is later.
    std::uint64_t duration_ns() const { return duration_; }
    //! Every event in order. Only for small programs.
    std::vector<Event> materialize() const;

  private:
    friend EventStream compile_unchecked(PulseProgram const& program);

    std::shared_ptr<detail::CompiledBlock const> root_;
    std::uint64_t size_ = 0;
    std::uint64_t duration_ = 0;
};

enum class ViolationKind
{
    rf_acq_overlap,
    shuttle_during_acq,
    unmatched_edge,
    loop_overrun,
};
std::string_view to_string(ViolationKind kind);

struct Interval
{
    std::uint64_t begin_ns = 0;
    std::uint64_t end_ns = 0;  //!< exclusive
};

struct Violation
{
    ViolationKind kind{};
    std::uint64_t t_ns = 0;
    Interval first;   //!< RF range for overlaps, SHUTTLE pulse for (b)
    Interval second;  //!< ACQ range
    std::string message;
};

struct ValidationReport
{
    std::vector<Violation> violations;  //!< at most the reporting cap
    std::uint64_t total = 0;            //!< including unreported ones

    bool ok() const { return total == 0; }
};

//! Sweep the unrolled program and report timing violations.
ValidationReport validate(PulseProgram const& program,
                          std::size_t max_reported = 100);

//! Validate, then compile; throws ValidationError listing the first few
//! violations.
EventStream compile(PulseProgram const& program);
//! Compile without validation. Loop iterations may then overlap; the
//! stream is still sorted.
EventStream compile_unchecked(PulseProgram const& program);

//! `loop n period P { RF on 0..t_p; ACQ on acq_start..acq_end }`.
PulseProgram build_spinlock_program(std::uint64_t n_pulses,
                                    std::uint64_t t_p_ns,
                                    std::uint64_t period_ns,
                                    std::uint64_t acq_start_ns,
                                    std::uint64_t acq_end_ns);

//! Binary event log: "FCEV", u16 version, then (t u64, ch u8, action u8)
//! records, all little-endian.
inline constexpr std::uint16_t event_log_version = 1;
void write_event_log(std::ostream& out, EventStream const& stream);
std::vector<Event> read_event_log(std::istream& in);

}  // namespace fcdnp
