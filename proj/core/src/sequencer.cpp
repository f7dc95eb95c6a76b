// Copyright 2026 The fcdnp Authors.
// SPDX-License-Identifier: Apache-2.0
#include "fcdnp/sequencer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "fcdnp/error.hpp"

namespace fcdnp {

bool LoopStmt::operator==(LoopStmt const& other) const
{
    return at_ns == other.at_ns && count == other.count
           && period_ns == other.period_ns && body == other.body;
}

namespace {

constexpr std::array<std::string_view, channel_count> channel_names
    = {"LASER", "MW", "SHUTTLE", "RF", "ACQ"};

}  // namespace

std::string_view to_string(Channel ch)
{
    return channel_names[static_cast<std::size_t>(ch)];
}

std::string_view to_string(Action a)
{
    return a == Action::on ? "on" : "off";
}

std::optional<Channel> channel_from_string(std::string_view name)
{
    for (std::size_t i = 0; i < channel_names.size(); ++i)
    {
        auto const& c = channel_names[i];
        if (c.size() == name.size()
            && std::equal(c.begin(), c.end(), name.begin(), [](char a, char b) {
                   return a == std::toupper(static_cast<unsigned char>(b));
               }))
        {
            return static_cast<Channel>(i);
        }
    }
    return std::nullopt;
}

std::string_view to_string(ViolationKind kind)
{
    switch (kind)
    {
        case ViolationKind::rf_acq_overlap:
            return "rf_acq_overlap";
        case ViolationKind::shuttle_during_acq:
            return "shuttle_during_acq";
        case ViolationKind::unmatched_edge:
            return "unmatched_edge";
        case ViolationKind::loop_overrun:
            return "loop_overrun";
    }
    return "unknown";
}

//---------------------------------------------------------------------------//
// Parsing and printing
//---------------------------------------------------------------------------//

namespace {

struct Token
{
    enum Kind
    {
        word,
        number,
        lbrace,
        rbrace,
        separator,
        end,
    };
    Kind kind = end;
    std::string_view text;
    std::size_t line = 1;
    std::size_t column = 1;
};

class Lexer
{
  public:
    explicit Lexer(std::string_view text) : text_(text) { advance(); }

    Token const& peek() const { return tok_; }
    Token take()
    {
        Token t = tok_;
        advance();
        return t;
    }

  private:
    void advance()
    {
        // Skip blanks and comments; newlines are separators.
        while (pos_ < text_.size())
        {
            char const c = text_[pos_];
            if (c == '#')
            {
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    bump();
            }
            else if (c == ' ' || c == '\t' || c == '\r')
            {
                bump();
            }
            else
            {
                break;
            }
        }
        tok_ = Token{};
        tok_.line = line_;
        tok_.column = col_;
        if (pos_ >= text_.size())
            return;
        std::size_t const start = pos_;
        char const c = text_[pos_];
        auto word_char = [](char ch) {
            return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'
                   || ch == '.' || ch == '-' || ch == '+';
        };
        if (c == '{' || c == '}' || c == ';' || c == '\n')
        {
            tok_.kind = c == '{'   ? Token::lbrace
                        : c == '}' ? Token::rbrace
                                   : Token::separator;
            bump();
        }
        else if (word_char(c))
        {
            bool const numeric = std::isdigit(static_cast<unsigned char>(c))
                                 || c == '-' || c == '+' || c == '.';
            while (pos_ < text_.size() && word_char(text_[pos_]))
                bump();
            tok_.kind = numeric ? Token::number : Token::word;
        }
        else
        {
            throw ParseError(line_, col_,
                             std::string("unexpected character '") + c + "'");
        }
        tok_.text = text_.substr(start, pos_ - start);
    }

    void bump()
    {
        if (text_[pos_] == '\n')
        {
            ++line_;
            col_ = 1;
        }
        else
        {
            ++col_;
        }
        ++pos_;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
    Token tok_;
};

class Parser
{
  public:
    explicit Parser(std::string_view text) : lex_(text) {}

    PulseProgram program()
    {
        PulseProgram p;
        p.statements = block(false);
        return p;
    }

  private:
    [[noreturn]] static void fail(Token const& t, std::string msg)
    {
        throw ParseError(t.line, t.column, std::move(msg));
    }

    static bool is_word(Token const& t, std::string_view w)
    {
        if (t.kind != Token::word || t.text.size() != w.size())
            return false;
        for (std::size_t i = 0; i < w.size(); ++i)
        {
            if (std::tolower(static_cast<unsigned char>(t.text[i])) != w[i])
                return false;
        }
        return true;
    }

    std::uint64_t integer(char const* what, bool positive)
    {
        Token const t = lex_.take();
        if (t.kind != Token::number)
            fail(t, std::string("expected ") + what);
        if (t.text.front() == '-')
        {
            fail(t, positive ? std::string(what) + " must be a positive integer"
                             : "non-negative time required");
        }
        std::string_view digits = t.text;
        if (digits.front() == '+')
            digits.remove_prefix(1);
        if (digits.empty()
            || !std::all_of(digits.begin(), digits.end(), [](char c) {
                   return std::isdigit(static_cast<unsigned char>(c));
               }))
        {
            fail(t, std::string("integer ") + what + " required");
        }
        std::uint64_t v = 0;
        for (char c : digits)
        {
            auto const d = std::uint64_t(c - '0');
            if (v > (std::numeric_limits<std::uint64_t>::max() - d) / 10)
                fail(t, std::string(what) + " out of range");
            v = v * 10 + d;
        }
        if (positive && v == 0)
            fail(t, std::string(what) + " must be a positive integer");
        return v;
    }

    std::vector<Statement> block(bool nested)
    {
        std::vector<Statement> out;
        while (true)
        {
            Token const& t = lex_.peek();
            if (t.kind == Token::separator)
            {
                lex_.take();
                continue;
            }
            if (t.kind == Token::end)
            {
                if (nested)
                    fail(t, "missing '}'");
                return out;
            }
            if (t.kind == Token::rbrace)
            {
                if (!nested)
                    fail(t, "unmatched '}'");
                lex_.take();
                return out;
            }
            out.push_back(statement());
            Token const& after = lex_.peek();
            if (after.kind == Token::separator)
                lex_.take();
            else if (after.kind != Token::end && after.kind != Token::rbrace)
                fail(after, "expected end of statement");
        }
    }

    Statement statement()
    {
        Token const t = lex_.peek();
        std::uint64_t at = 0;
        if (is_word(t, "at"))
        {
            lex_.take();
            at = integer("time", false);
        }
        else if (!is_word(t, "loop"))
        {
            fail(t, "expected 'at' or 'loop'");
        }

        Token const head = lex_.take();
        if (is_word(head, "loop"))
        {
            LoopStmt loop;
            loop.at_ns = at;
            loop.count = integer("loop count", true);
            Token const kw = lex_.take();
            if (!is_word(kw, "period"))
                fail(kw, "expected 'period'");
            loop.period_ns = integer("period", true);
            Token const open = lex_.take();
            if (open.kind != Token::lbrace)
                fail(open, "expected '{'");
            loop.body = block(true);
            return Statement{std::move(loop)};
        }
        if (head.kind != Token::word)
            fail(head, "expected channel name");
        auto const ch = channel_from_string(head.text);
        if (!ch)
            fail(head, "unknown channel '" + std::string(head.text) + "'");
        Token const act = lex_.take();
        Action action;
        if (is_word(act, "on"))
            action = Action::on;
        else if (is_word(act, "off"))
            action = Action::off;
        else
            fail(act, "expected 'on' or 'off'");
        return Statement{EdgeStmt{at, *ch, action}};
    }

    Lexer lex_;
};

void print_block(std::ostringstream& os,
                 std::vector<Statement> const& stmts,
                 int depth)
{
    std::string const indent(std::size_t(depth) * 2, ' ');
    for (auto const& s : stmts)
    {
        if (auto const* e = std::get_if<EdgeStmt>(&s.node))
        {
            os << indent << "at " << e->at_ns << ' ' << to_string(e->ch) << ' '
               << to_string(e->action) << '\n';
            continue;
        }
        auto const& l = std::get<LoopStmt>(s.node);
        os << indent;
        if (l.at_ns != 0)
            os << "at " << l.at_ns << ' ';
        os << "loop " << l.count << " period " << l.period_ns << " {\n";
        print_block(os, l.body, depth + 1);
        os << indent << "}\n";
    }
}

}  // namespace

PulseProgram parse_program(std::string_view text)
{
    return Parser(text).program();
}

std::string print_program(PulseProgram const& program)
{
    std::ostringstream os;
    print_block(os, program.statements, 0);
    return os.str();
}

//---------------------------------------------------------------------------//
// Compilation
//---------------------------------------------------------------------------//

namespace detail {

struct CompiledLoop;

struct CompiledBlock
{
    std::vector<Event> edges;  // sorted, relative to block start
    std::vector<CompiledLoop> loops;
    std::uint64_t events = 0;
    std::uint64_t last_event = 0;  // valid when events > 0
    std::uint64_t extent = 0;      // max(last_event, loop ends)
};

struct CompiledLoop
{
    std::uint64_t at = 0;
    std::uint64_t count = 0;
    std::uint64_t period = 0;
    std::uint64_t chains = 1;  // interleaved iteration chains
    CompiledBlock body;
};

class LoopCursor;

class BlockCursor
{
  public:
    explicit BlockCursor(CompiledBlock const& block);
    void reset(std::uint64_t offset);
    bool has() const { return has_; }
    Event const& head() const { return head_; }
    void advance();

  private:
    void select();

    CompiledBlock const* block_;
    std::uint64_t offset_ = 0;
    std::size_t edge_ = 0;
    std::vector<LoopCursor> loops_;
    int source_ = -1;  // -1 for the block's own edges
    bool has_ = false;
    Event head_;
};

class LoopCursor
{
  public:
    explicit LoopCursor(CompiledLoop const& loop);
    void reset(std::uint64_t offset);
    bool has() const { return has_; }
    Event const& head() const { return head_; }
    void advance();

  private:
    struct Chain
    {
        BlockCursor cursor;
        std::uint64_t iteration = 0;
        bool live = false;
    };
    void start(Chain& c, std::uint64_t iteration);
    void select();

    CompiledLoop const* loop_;
    std::uint64_t base_ = 0;
    std::vector<Chain> chains_;
    std::size_t source_ = 0;
    bool has_ = false;
    Event head_;
};

BlockCursor::BlockCursor(CompiledBlock const& block) : block_(&block)
{
    loops_.reserve(block.loops.size());
    for (auto const& l : block.loops)
        loops_.emplace_back(l);
}

void BlockCursor::reset(std::uint64_t offset)
{
    offset_ = offset;
    edge_ = 0;
    for (auto& l : loops_)
        l.reset(offset);
    select();
}

void BlockCursor::select()
{
    has_ = false;
    if (edge_ < block_->edges.size())
    {
        head_ = block_->edges[edge_];
        head_.t_ns += offset_;
        source_ = -1;
        has_ = true;
    }
    for (std::size_t i = 0; i < loops_.size(); ++i)
    {
        if (loops_[i].has() && (!has_ || event_before(loops_[i].head(), head_)))
        {
            head_ = loops_[i].head();
            source_ = int(i);
            has_ = true;
        }
    }
}

void BlockCursor::advance()
{
    if (source_ < 0)
        ++edge_;
    else
        loops_[std::size_t(source_)].advance();
    select();
}

LoopCursor::LoopCursor(CompiledLoop const& loop) : loop_(&loop)
{
    chains_.reserve(loop.chains);
    for (std::uint64_t i = 0; i < loop.chains; ++i)
        chains_.push_back(Chain{BlockCursor(loop.body)});
}

void LoopCursor::start(Chain& c, std::uint64_t iteration)
{
    c.iteration = iteration;
    c.live = iteration < loop_->count;
    if (c.live)
        c.cursor.reset(base_ + loop_->at + iteration * loop_->period);
}

void LoopCursor::reset(std::uint64_t offset)
{
    base_ = offset;
    for (std::size_t j = 0; j < chains_.size(); ++j)
        start(chains_[j], j);
    select();
}

void LoopCursor::select()
{
    has_ = false;
    for (std::size_t j = 0; j < chains_.size(); ++j)
    {
        auto const& c = chains_[j];
        if (c.live && c.cursor.has()
            && (!has_ || event_before(c.cursor.head(), head_)))
        {
            head_ = c.cursor.head();
            source_ = j;
            has_ = true;
        }
    }
}

void LoopCursor::advance()
{
    Chain& c = chains_[source_];
    c.cursor.advance();
    if (!c.cursor.has())
        start(c, c.iteration + chains_.size());
    select();
}

}  // namespace detail

namespace {

using detail::CompiledBlock;
using detail::CompiledLoop;

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r))
        throw ValidationError("program time exceeds the 64-bit ns range");
    return r;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r;
    if (__builtin_mul_overflow(a, b, &r))
        throw ValidationError("program time exceeds the 64-bit ns range");
    return r;
}

CompiledBlock compile_block(std::vector<Statement> const& stmts)
{
    CompiledBlock b;
    for (auto const& s : stmts)
    {
        if (auto const* e = std::get_if<EdgeStmt>(&s.node))
        {
            b.edges.push_back(Event{e->at_ns, e->ch, e->action});
            continue;
        }
        auto const& l = std::get<LoopStmt>(s.node);
        CompiledLoop cl;
        cl.at = l.at_ns;
        cl.count = l.count;
        cl.period = l.period_ns;
        cl.body = compile_block(l.body);
        std::uint64_t const loop_end = checked_add(cl.at, checked_mul(cl.count, cl.period));
        b.extent = std::max(b.extent, loop_end);
        if (cl.body.events == 0)
            continue;
        cl.chains = std::min(cl.count, cl.body.last_event / cl.period + 1);
        std::uint64_t const last = checked_add(
            checked_add(cl.at, checked_mul(cl.count - 1, cl.period)),
            cl.body.last_event);
        b.last_event = b.events ? std::max(b.last_event, last) : last;
        b.events = checked_add(b.events, checked_mul(cl.count, cl.body.events));
        b.loops.push_back(std::move(cl));
    }
    std::stable_sort(b.edges.begin(), b.edges.end(), event_before);
    if (!b.edges.empty())
    {
        b.last_event = b.events ? std::max(b.last_event, b.edges.back().t_ns)
                                : b.edges.back().t_ns;
        b.events += b.edges.size();
    }
    if (b.events)
        b.extent = std::max(b.extent, b.last_event);
    return b;
}

}  // namespace

EventReader::EventReader(std::shared_ptr<detail::CompiledBlock const> root)
    : root_(std::move(root))
    , cursor_(std::make_unique<detail::BlockCursor>(*root_))
{
    cursor_->reset(0);
}

EventReader::EventReader(EventReader&&) noexcept = default;
EventReader& EventReader::operator=(EventReader&&) noexcept = default;
EventReader::~EventReader() = default;

bool EventReader::next(Event& out)
{
    if (!cursor_->has())
        return false;
    out = cursor_->head();
    cursor_->advance();
    return true;
}

EventStream::EventStream() : root_(std::make_shared<CompiledBlock>()) {}

std::vector<Event> EventStream::materialize() const
{
    std::vector<Event> out;
    out.reserve(size_);
    auto r = reader();
    Event e;
    while (r.next(e))
        out.push_back(e);
    return out;
}

EventStream compile_unchecked(PulseProgram const& program)
{
    auto root = std::make_shared<CompiledBlock>(compile_block(program.statements));
    EventStream s;
    s.size_ = root->events;
    s.duration_ = root->extent;
    s.root_ = std::move(root);
    return s;
}

//---------------------------------------------------------------------------//
// Validation
//---------------------------------------------------------------------------//

namespace {

class Collector
{
  public:
    explicit Collector(std::size_t cap) : cap_(cap) {}

    void add(Violation v)
    {
        ++report_.total;
        if (report_.violations.size() < cap_)
            report_.violations.push_back(std::move(v));
    }
    ValidationReport take() { return std::move(report_); }

  private:
    std::size_t cap_;
    ValidationReport report_;
};

void check_loops(std::vector<Statement> const& stmts,
                 std::uint64_t offset,
                 Collector& out)
{
    for (auto const& s : stmts)
    {
        auto const* l = std::get_if<LoopStmt>(&s.node);
        if (!l)
            continue;
        std::uint64_t const start = checked_add(offset, l->at_ns);
        CompiledBlock const body = compile_block(l->body);
        if (body.events && body.last_event > l->period_ns)
        {
            std::ostringstream os;
            os << "loop at " << start << " ns: body runs to " << body.last_event
               << " ns, beyond its period of " << l->period_ns << " ns";
            Violation v;
            v.kind = ViolationKind::loop_overrun;
            v.t_ns = start;
            v.first = {start, start + body.last_event};
            v.second = {start, start + l->period_ns};
            v.message = os.str();
            out.add(std::move(v));
        }
        check_loops(l->body, start, out);
    }
}

std::string range_text(Channel ch, Interval r)
{
    std::ostringstream os;
    os << to_string(ch) << " [" << r.begin_ns << ", " << r.end_ns << ")";
    return os.str();
}

struct PendingOverlap
{
    ViolationKind kind;
    Channel a;
    Channel b;
    Interval ra;
    Interval rb;
    bool a_done = false;
    bool b_done = false;
};

}  // namespace

ValidationReport validate(PulseProgram const& program, std::size_t max_reported)
{
    Collector out(max_reported);
    check_loops(program.statements, 0, out);

    EventStream const stream = compile_unchecked(program);
    std::array<std::optional<std::uint64_t>, channel_count> on_since{};
    std::vector<PendingOverlap> pending;

    auto emit = [&](PendingOverlap const& p) {
        Violation v;
        v.kind = p.kind;
        v.t_ns = std::max(p.ra.begin_ns, p.rb.begin_ns);
        v.first = p.ra;
        v.second = p.rb;
        v.message = range_text(p.a, p.ra)
                    + (p.kind == ViolationKind::rf_acq_overlap ? " overlaps "
                                                               : " fires during ")
                    + range_text(p.b, p.rb);
        out.add(std::move(v));
    };
    auto open_overlap = [&](ViolationKind kind, Channel a, Channel b) {
        pending.push_back(PendingOverlap{kind, a, b,
                                         {*on_since[std::size_t(a)], 0},
                                         {*on_since[std::size_t(b)], 0}});
    };
    auto is_on = [&](Channel c) { return on_since[std::size_t(c)].has_value(); };

    auto reader = stream.reader();
    Event e;
    while (reader.next(e))
    {
        auto& since = on_since[std::size_t(e.ch)];
        if (e.action == Action::on)
        {
            if (since)
            {
                Violation v;
                v.kind = ViolationKind::unmatched_edge;
                v.t_ns = e.t_ns;
                v.first = {*since, e.t_ns};
                v.message = std::string(to_string(e.ch)) + " turned on at "
                            + std::to_string(e.t_ns) + " ns while already on since "
                            + std::to_string(*since) + " ns";
                out.add(std::move(v));
                continue;
            }
            since = e.t_ns;
            if (e.ch == Channel::rf && is_on(Channel::acq))
                open_overlap(ViolationKind::rf_acq_overlap, Channel::rf, Channel::acq);
            if (e.ch == Channel::acq && is_on(Channel::rf))
                open_overlap(ViolationKind::rf_acq_overlap, Channel::rf, Channel::acq);
            if (e.ch == Channel::shuttle && is_on(Channel::acq))
                open_overlap(ViolationKind::shuttle_during_acq, Channel::shuttle, Channel::acq);
            if (e.ch == Channel::acq && is_on(Channel::shuttle))
                open_overlap(ViolationKind::shuttle_during_acq, Channel::shuttle, Channel::acq);
            continue;
        }
        if (!since)
        {
            Violation v;
            v.kind = ViolationKind::unmatched_edge;
            v.t_ns = e.t_ns;
            v.first = {e.t_ns, e.t_ns};
            v.message = std::string(to_string(e.ch)) + " turned off at "
                        + std::to_string(e.t_ns) + " ns without a matching on";
            out.add(std::move(v));
            continue;
        }
        since.reset();
        for (auto& p : pending)
        {
            if (p.a == e.ch && !p.a_done)
            {
                p.ra.end_ns = e.t_ns;
                p.a_done = true;
            }
            if (p.b == e.ch && !p.b_done)
            {
                p.rb.end_ns = e.t_ns;
                p.b_done = true;
            }
        }
        std::erase_if(pending, [&](PendingOverlap const& p) {
            if (!(p.a_done && p.b_done))
                return false;
            emit(p);
            return true;
        });
    }

    for (auto& p : pending)
    {
        if (!p.a_done)
            p.ra.end_ns = stream.duration_ns();
        if (!p.b_done)
            p.rb.end_ns = stream.duration_ns();
        emit(p);
    }
    for (int c = 0; c < channel_count; ++c)
    {
        if (!on_since[std::size_t(c)])
            continue;
        Violation v;
        v.kind = ViolationKind::unmatched_edge;
        v.t_ns = *on_since[std::size_t(c)];
        v.first = {v.t_ns, stream.duration_ns()};
        v.message = std::string(to_string(Channel(c))) + " turned on at "
                    + std::to_string(v.t_ns) + " ns is never turned off";
        out.add(std::move(v));
    }
    return out.take();
}

EventStream compile(PulseProgram const& program)
{
    auto const report = validate(program, 3);
    if (!report.ok())
    {
        std::ostringstream os;
        os << report.total << " timing violation(s)";
        for (auto const& v : report.violations)
            os << "; " << to_string(v.kind) << ": " << v.message;
        throw ValidationError(os.str());
    }
    return compile_unchecked(program);
}

PulseProgram build_spinlock_program(std::uint64_t n_pulses,
                                    std::uint64_t t_p_ns,
                                    std::uint64_t period_ns,
                                    std::uint64_t acq_start_ns,
                                    std::uint64_t acq_end_ns)
{
    if (n_pulses < 1)
        throw ValidationError("spin-lock program needs n_pulses >= 1");
    if (!(t_p_ns > 0))
        throw ValidationError("spin-lock geometry violated: t_p > 0");
    if (!(t_p_ns < acq_start_ns))
        throw ValidationError("spin-lock geometry violated: t_p < acq_start");
    if (!(acq_start_ns < acq_end_ns))
        throw ValidationError("spin-lock geometry violated: acq_start < acq_end");
    if (!(acq_end_ns <= period_ns))
        throw ValidationError("spin-lock geometry violated: acq_end <= period");
    LoopStmt loop;
    loop.count = n_pulses;
    loop.period_ns = period_ns;
    loop.body = {
        Statement{EdgeStmt{0, Channel::rf, Action::on}},
        Statement{EdgeStmt{t_p_ns, Channel::rf, Action::off}},
        Statement{EdgeStmt{acq_start_ns, Channel::acq, Action::on}},
        Statement{EdgeStmt{acq_end_ns, Channel::acq, Action::off}},
    };
    PulseProgram p;
    p.statements.push_back(Statement{std::move(loop)});
    return p;
}

void write_event_log(std::ostream& out, EventStream const& stream)
{
    detail::write_header(out, "FCEV", event_log_version);
    auto r = stream.reader();
    Event e;
    while (r.next(e))
    {
        detail::put_le(out, e.t_ns);
        detail::put_le(out, static_cast<std::uint8_t>(e.ch));
        detail::put_le(out, static_cast<std::uint8_t>(e.action));
    }
    if (!out)
        throw DataError("failed writing event log");
}

std::vector<Event> read_event_log(std::istream& in)
{
    detail::read_header(in, "FCEV", event_log_version);
    std::vector<Event> events;
    std::uint64_t t = 0;
    while (detail::get_le(in, t))
    {
        std::uint8_t ch = 0;
        std::uint8_t action = 0;
        if (!detail::get_le(in, ch) || !detail::get_le(in, action))
            throw DataError("truncated event record");
        if (ch >= channel_count || action > 1)
            throw DataError("invalid event record at offset "
                            + std::to_string(events.size()));
        events.push_back(Event{t, Channel(ch), Action(action)});
    }
    return events;
}

}  // namespace fcdnp
