#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hum/model.hpp"
#include "hum/oracle.hpp"

namespace hum {

enum class CommandKind {
  Variable,
  Relation,
  Marginal,
  Instance,
  Defactq,
  ProbabilityOf,
  Retract,
  ShowLabel,
  ShowNogoods,
  Reset,
};

struct CommandSpec {
  CommandKind kind;
  const char* name;
  std::size_t min_args;
  std::size_t max_args;
};

inline constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1);

inline constexpr CommandSpec kCommandSpecs[] = {
    {CommandKind::Variable, "Variable", 2, kUnbounded},
    {CommandKind::Relation, "Relation", 3, kUnbounded},
    {CommandKind::Marginal, "Marginal", 2, kUnbounded},
    {CommandKind::Instance, "Instance", 1, 1},
    {CommandKind::Defactq, "Defactq", 1, 1},
    {CommandKind::ProbabilityOf, "Probability-of", 1, 1},
    {CommandKind::Retract, "Retract", 1, 1},
    {CommandKind::ShowLabel, "Show-label", 0, 1},
    {CommandKind::ShowNogoods, "Show-nogoods", 0, 0},
    {CommandKind::Reset, "Reset", 0, 0},
};

inline const CommandSpec& spec_of(CommandKind k) {
  for (const auto& s : kCommandSpecs)
    if (s.kind == k) return s;
  throw Error("unknown command kind");
}

struct Command {
  CommandKind kind = CommandKind::Reset;
  std::vector<Term> args;
  /// Source text as typed, echoed in transcripts.
  std::string text;
  SourcePosition position;

  /// Canonical form; reparses to an equal command.
  Term to_term() const {
    std::vector<Term> items{Term::symbol(spec_of(kind).name)};
    items.insert(items.end(), args.begin(), args.end());
    return Term::list(std::move(items));
  }

  std::string str() const { return to_term().str(); }

  friend bool operator==(const Command& a, const Command& b) { return a.kind == b.kind && a.args == b.args; }
};

/// Heads are case-insensitive; `Deffactq` and `Probability` are accepted
/// spellings of `Defactq` and `Probability-of`.
inline Command parse_command(const Term& t, SourcePosition pos = {}, std::string text = {}) {
  if (!t.is_list() || t.items().empty() || !t[0].is_symbol())
    throw ParseError("expected a command of the form (Head args...)", pos.line, pos.column);
  const std::string& head = t[0].text();
  std::optional<CommandKind> kind;
  for (const auto& s : kCommandSpecs)
    if (detail::iequals(head, s.name)) kind = s.kind;
  if (detail::iequals(head, "Deffactq")) kind = CommandKind::Defactq;
  if (detail::iequals(head, "Probability")) kind = CommandKind::ProbabilityOf;
  if (!kind) throw ParseError("unknown command '" + head + "'", pos.line, pos.column);

  const auto& spec = spec_of(*kind);
  std::size_t n = t.size() - 1;
  if (n < spec.min_args || n > spec.max_args) {
    std::string expected = spec.min_args == spec.max_args ? std::to_string(spec.min_args)
                           : spec.max_args == kUnbounded  ? "at least " + std::to_string(spec.min_args)
                                                          : "at most " + std::to_string(spec.max_args);
    throw ParseError(std::string(spec.name) + " expects " + expected + " argument(s), got " + std::to_string(n),
                     pos.line, pos.column);
  }
  Command cmd{*kind, std::vector<Term>(t.items().begin() + 1, t.items().end()), std::move(text), pos};
  if (cmd.text.empty()) cmd.text = t.str();
  return cmd;
}

inline std::vector<Command> parse_commands(std::string_view source) {
  std::vector<Command> out;
  Reader reader(source);
  while (auto parsed = reader.next()) out.push_back(parse_command(parsed->term, parsed->position, parsed->text));
  return out;
}

inline Command parse_command(std::string_view text) {
  auto cmds = parse_commands(text);
  if (cmds.size() != 1) throw ParseError("expected exactly one command", 1, 1);
  return std::move(cmds.front());
}

struct Event {
  enum class Kind { LabelChanged, NogoodAdded, Assuming, Monitoring, Retracting };
  Kind kind;
  std::string text;
  /// Node term and its new label, for label changes.
  std::optional<std::string> node;
  std::optional<std::string> label;
};

inline const char* to_string(Event::Kind k) {
  switch (k) {
    case Event::Kind::LabelChanged: return "label-changed";
    case Event::Kind::NogoodAdded: return "nogood-added";
    case Event::Kind::Assuming: return "assuming";
    case Event::Kind::Monitoring: return "monitoring";
    case Event::Kind::Retracting: return "retracting";
  }
  return "unknown";
}

struct CommandResult {
  std::vector<std::string> lines;
  std::optional<double> value;
  std::optional<std::string> display;
  std::vector<Event> events;
};

struct TranscriptEntry {
  std::string input;
  std::vector<std::string> outputs;
};

struct SessionOptions {
  int precision = 2;
  /// Cross-check every probability query against the brute-force oracle.
  bool verify = false;
};

/// Display precision, overridable through HUM_PRECISION.
inline int display_precision_from_env(int fallback = 2) {
  if (const char* env = std::getenv("HUM_PRECISION")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 0 && v <= 17) return static_cast<int>(v);
  }
  return fallback;
}

/// Rounds to `precision` decimals and trims trailing zeros: 0.5 -> "0.5".
inline std::string format_probability(double p, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, p);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

/// One interactive modeling session: a model plus its transcript.
/// Every command applies atomically.
class Session {
 public:
  explicit Session(SessionOptions options = {}) : options_(options) {}

  CommandResult eval_command(const Command& cmd) {
    Model backup = model_;
    try {
      CommandResult result = dispatch(cmd);
      collect_events(result);
      transcript_.push_back(TranscriptEntry{cmd.text, result.lines});
      return result;
    } catch (...) {
      model_ = std::move(backup);
      throw;
    }
  }

  /// Parses and evaluates every command in `text`, stopping at the first error.
  std::vector<CommandResult> execute(std::string_view text) {
    std::vector<CommandResult> out;
    for (const auto& cmd : parse_commands(text)) out.push_back(eval_command(cmd));
    return out;
  }

  std::string format(double p) const { return format_probability(p, options_.precision); }

  const Model& model() const noexcept { return model_; }
  Model& model() noexcept { return model_; }
  const std::vector<TranscriptEntry>& transcript() const noexcept { return transcript_; }
  const SessionOptions& options() const noexcept { return options_; }

 private:
  CommandResult dispatch(const Command& cmd) {
    CommandResult r;
    const auto& a = cmd.args;
    switch (cmd.kind) {
      case CommandKind::Variable: {
        std::vector<std::string> values;
        for (std::size_t i = 1; i < a.size(); ++i) {
          if (!a[i].is_atom()) throw ModelError("variable values must be symbols, got " + a[i].str());
          values.push_back(a[i].text());
        }
        model_.declare_variable(a[0], std::move(values));
        break;
      }
      case CommandKind::Relation:
        model_.declare_relation(a[0], a[1], std::vector<Term>(a.begin() + 2, a.end()));
        break;
      case CommandKind::Marginal:
        model_.declare_marginal(model_.parse_marginal(cmd.to_term()));
        break;
      case CommandKind::Instance:
        model_.instantiate(a[0]);
        break;
      case CommandKind::Defactq:
        model_.assert_fact(a[0]);
        break;
      case CommandKind::ProbabilityOf: {
        NodeId n = model_.node_for(a[0]);
        double p = model_.network().probability_of(n);
        if (options_.verify) verify(n, p, a[0]);
        r.value = p;
        r.display = format(p);
        r.lines.push_back(*r.display);
        break;
      }
      case CommandKind::Retract:
        model_.retract(a[0]);
        break;
      case CommandKind::ShowLabel: {
        const auto& atms = model_.network().atms();
        if (a.empty()) {
          for (std::size_t i = 0; i < atms.node_count(); ++i) r.lines.push_back(atms.dump(NodeId(i)));
        } else {
          r.lines.push_back(atms.dump(model_.node_for(a[0])));
        }
        break;
      }
      case CommandKind::ShowNogoods: {
        const auto& atms = model_.network().atms();
        for (const auto& ng : atms.nogoods()) r.lines.push_back(atms.format_environment(ng));
        break;
      }
      case CommandKind::Reset:
        model_ = Model{};
        break;
    }
    return r;
  }

  void verify(NodeId n, double p, const Term& term) const {
    auto snapshot = oracle::snapshot(model_.network());
    double expected = oracle::oracle_probability(n, snapshot);
    if (std::abs(expected - p) > 1e-9)
      throw VerificationError("verification failed for " + term.str() + ": evaluator " + std::to_string(p) +
                              ", oracle " + std::to_string(expected));
  }

  void collect_events(CommandResult& r) {
    for (const auto& e : model_.structure().drain_events()) {
      auto kind = e.kind == StructureEvent::Kind::Assuming     ? Event::Kind::Assuming
                  : e.kind == StructureEvent::Kind::Monitoring ? Event::Kind::Monitoring
                                                               : Event::Kind::Retracting;
      r.events.push_back(Event{kind, e.statement.str(), std::nullopt, std::nullopt});
      r.lines.insert(r.lines.end() - (r.value ? 1 : 0), e.line());
    }
    auto& atms = model_.network().atms();
    std::vector<NodeId> changed;
    for (const auto& c : atms.drain_journal()) {
      if (c.kind == AtmsChange::Kind::NogoodAdded) {
        r.events.push_back(Event{Event::Kind::NogoodAdded, atms.format_environment(c.nogood), std::nullopt, std::nullopt});
      } else if (std::find(changed.begin(), changed.end(), *c.node) == changed.end()) {
        changed.push_back(*c.node);
      }
    }
    for (auto n : changed) {
      if (n.index() >= atms.node_count()) continue;
      r.events.push_back(Event{Event::Kind::LabelChanged, atms.dump(n), atms.node(n).term.str(),
                               atms.format_label(atms.label_of(n))});
    }
  }

  SessionOptions options_;
  Model model_;
  std::vector<TranscriptEntry> transcript_;
};

struct ScriptOptions {
  SessionOptions session;
  bool keep_going = false;
  /// Echo each command before its output, `>`-prefixed when it yields a value.
  bool echo = true;
};

struct ScriptResult {
  int status = 0;
  std::string output;
  std::vector<std::string> errors;
};

/// Runs a whole script. Stops at the first error unless `keep_going`.
inline ScriptResult run_script_text(std::string_view source, const ScriptOptions& options) {
  ScriptResult result;
  Session session(options.session);
  std::vector<Command> commands;
  try {
    commands = parse_commands(source);
  } catch (const ParseError& e) {
    result.status = 2;
    result.errors.push_back(e.what());
    return result;
  }
  for (const auto& cmd : commands) {
    if (options.echo) result.output += (cmd.kind == CommandKind::ProbabilityOf ? ">" : "") + cmd.text + "\n";
    try {
      for (const auto& line : session.eval_command(cmd).lines) result.output += line + "\n";
    } catch (const Error& e) {
      result.status = 1;
      result.errors.push_back(std::to_string(cmd.position.line) + ":" + std::to_string(cmd.position.column) + ": " +
                              e.what());
      if (!options.keep_going) break;
    }
  }
  return result;
}

inline ScriptResult run_script(const std::string& path, const ScriptOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return ScriptResult{2, {}, {"cannot read " + path}};
  std::stringstream buf;
  buf << in.rdbuf();
  return run_script_text(buf.str(), options);
}

}  // namespace hum
