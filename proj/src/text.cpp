#include "vflow/text.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

#include "vflow/error.hpp"

namespace vflow::text {

namespace {

enum class Tok { ident, string, number, punct, at_word, bad, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;  // decoded value for strings; raw spelling otherwise
  int line = 1;
  int column = 1;

  bool is(Tok k, std::string_view t) const { return kind == k && text == t; }
  bool is_punct(std::string_view t) const { return is(Tok::punct, t); }
  bool is_word(std::string_view t) const { return is(Tok::ident, t); }
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::string rstrip(std::string_view s) {
  std::size_t n = s.size();
  while (n > 0 && (s[n - 1] == ' ' || s[n - 1] == '\t' || s[n - 1] == '\r')) --n;
  return std::string(s.substr(0, n));
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run(std::vector<Comment>& comments) {
    std::vector<Token> out;
    while (true) {
      skip_space_and_comments(comments);
      if (pos_ >= src_.size()) break;
      out.push_back(next());
    }
    out.push_back({Tok::end, "", line_, column()});
    return out;
  }

 private:
  int column() const { return static_cast<int>(pos_ - line_start_) + 1; }

  void newline() {
    ++line_;
    line_start_ = pos_;
  }

  void skip_space_and_comments(std::vector<Comment>& comments) {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++pos_;
        newline();
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        std::size_t begin = ++pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        comments.push_back({line_, rstrip(src_.substr(begin, pos_ - begin))});
      } else {
        break;
      }
    }
  }

  Token next() {
    Token tok;
    tok.line = line_;
    tok.column = column();
    char c = src_[pos_];

    if (ident_start(c)) {
      std::size_t begin = pos_;
      while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
      tok.kind = Tok::ident;
      tok.text = std::string(src_.substr(begin, pos_ - begin));
      return tok;
    }
    if (c == '@') {
      std::size_t begin = pos_++;
      while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
      tok.kind = pos_ - begin > 1 ? Tok::at_word : Tok::bad;
      tok.text = std::string(src_.substr(begin, pos_ - begin));
      return tok;
    }
    if (digit(c) || (c == '-' && pos_ + 1 < src_.size() && digit(src_[pos_ + 1]))) {
      std::size_t begin = pos_++;
      while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
      if (pos_ + 1 < src_.size() && src_[pos_] == '.' && digit(src_[pos_ + 1])) {
        ++pos_;
        while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
      }
      tok.kind = Tok::number;
      tok.text = std::string(src_.substr(begin, pos_ - begin));
      return tok;
    }
    if (c == '"') return lex_string(tok);
    if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
      pos_ += 2;
      tok.kind = Tok::punct;
      tok.text = "->";
      return tok;
    }
    static constexpr std::string_view single = "{};:,()=";
    if (single.find(c) != std::string_view::npos) {
      ++pos_;
      tok.kind = Tok::punct;
      tok.text = std::string(1, c);
      return tok;
    }
    ++pos_;
    tok.kind = Tok::bad;
    tok.text = std::string(1, c);
    return tok;
  }

  Token lex_string(Token tok) {
    ++pos_;  // opening quote
    std::string value;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '"') {
        ++pos_;
        tok.kind = Tok::string;
        tok.text = std::move(value);
        return tok;
      }
      if (c == '\n') break;
      if (c == '\\' && pos_ + 1 < src_.size()) {
        char e = src_[pos_ + 1];
        pos_ += 2;
        switch (e) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '\\': value += '\\'; break;
          case '"': value += '"'; break;
          default:
            value += '\\';
            value += e;
        }
        continue;
      }
      value += c;
      ++pos_;
    }
    tok.kind = Tok::bad;
    tok.text = "\"";
    return tok;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  int line_ = 1;
};

struct PendingArc {
  Token from;
  Token to;
};

struct SyntaxError {
  Token at;
  std::string message;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, ParseResult& result)
      : toks_(std::move(tokens)), result_(result) {}

  void document() {
    if (peek().kind == Tok::end) {
      error("PX-01", "", peek(), "expected 'vplan'; document is empty");
      return;
    }
    while (peek().kind != Tok::end) {
      if (peek().is_word("vplan")) {
        plan();
      } else {
        error("PX-01", "", peek(), "expected 'vplan', found " + describe(peek()));
        ++pos_;
        // resync at the next plan header
        while (peek().kind != Tok::end && !peek().is_word("vplan")) ++pos_;
      }
    }
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& take() {
    const Token& t = peek();
    if (t.kind != Tok::end) ++pos_;
    return t;
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::end: return "end of input";
      case Tok::string: return "string literal";
      case Tok::bad: return "invalid character '" + t.text + "'";
      default: return "'" + t.text + "'";
    }
  }

  void error(const std::string& code, const std::string& plan, const Token& at,
             const std::string& message, std::optional<std::string> node = std::nullopt) {
    Diagnostic d;
    d.code = code;
    d.plan = plan;
    d.node = std::move(node);
    d.line = at.line;
    d.column = at.column;
    d.message = message + " (column " + std::to_string(at.column) + ")";
    result_.diagnostics.push_back(std::move(d));
  }

  const Token& expect_punct(std::string_view p) {
    if (!peek().is_punct(p)) {
      throw SyntaxError{peek(), "expected '" + std::string(p) + "', found " + describe(peek())};
    }
    return take();
  }

  const Token& expect_ident(std::string_view what) {
    if (peek().kind != Tok::ident) {
      throw SyntaxError{peek(), "expected " + std::string(what) + ", found " + describe(peek())};
    }
    return take();
  }

  void expect_word(std::string_view word) {
    if (!peek().is_word(word)) {
      throw SyntaxError{peek(),
                        "expected '" + std::string(word) + "', found " + describe(peek())};
    }
    take();
  }

  void plan() {
    const Token open = take();  // 'vplan'
    std::string name;
    try {
      name = expect_ident("plan name").text;
    } catch (const SyntaxError& e) {
      error("PX-01", "", e.at, e.message);
      while (peek().kind != Tok::end && !peek().is_word("vplan")) ++pos_;
      return;
    }
    const Token name_tok = toks_[pos_ - 1];
    bool is_main = false;
    if (peek().is_word("main")) {
      const Token main_tok = take();
      is_main = true;
      if (seen_main_) {
        error("PX-04", name, main_tok,
              "duplicate main plan; '" + result_.plan_set.main + "' is already main");
      }
    }
    if (!peek().is_punct("{")) {
      error("PX-01", name, peek(), "expected '{', found " + describe(peek()));
      while (peek().kind != Tok::end && !peek().is_word("vplan")) ++pos_;
      return;
    }
    take();

    VPlan plan(name);
    std::vector<PendingArc> arcs;
    bool closed = false;
    while (peek().kind != Tok::end) {
      if (peek().is_punct("}")) {
        take();
        closed = true;
        break;
      }
      if (peek().is_word("vplan")) break;  // missing '}' before the next plan
      try {
        item(plan, arcs);
      } catch (const SyntaxError& e) {
        error("PX-01", name, e.at, e.message);
        recover();
      }
    }
    if (!closed) {
      error("PX-01", name, open, "plan '" + name + "' opened here is missing its closing '}'");
    }

    for (const auto& a : arcs) {
      const Token* unknown = nullptr;
      if (!plan.has_node(a.from.text)) {
        unknown = &a.from;
      } else if (!plan.has_node(a.to.text)) {
        unknown = &a.to;
      }
      if (unknown != nullptr) {
        error("PX-03", name, *unknown, "arc endpoint '" + unknown->text + "' is not declared",
              unknown->text);
        continue;
      }
      try {
        plan.add_arc(a.from.text, a.to.text);
      } catch (const Error& e) {
        // same-kind endpoints are malformed syntax; repeated arcs are duplicates
        const bool duplicate = e.code() == ErrorCode::DuplicateArc;
        error(duplicate ? "PX-02" : "PX-01", name, a.from, e.what());
      }
    }

    if (result_.plan_set.find(name) != nullptr) {
      error("PX-02", name, name_tok, "duplicate plan name '" + name + "'");
      return;
    }
    if (is_main && !seen_main_) {
      seen_main_ = true;
      result_.plan_set.main = name;
    }
    result_.plan_set.plans.push_back(std::move(plan));
  }

  void recover() {
    while (peek().kind != Tok::end) {
      if (peek().is_punct(";")) {
        take();
        return;
      }
      if (peek().is_punct("}") || peek().is_word("vplan")) return;
      take();
    }
  }

  void add_node(VPlan& plan, const Token& id_tok, auto&& node) {
    if (plan.has_node(id_tok.text)) {
      error("PX-02", plan.name(), id_tok, "duplicate node id '" + id_tok.text + "'", id_tok.text);
      return;
    }
    if constexpr (std::is_same_v<std::decay_t<decltype(node)>, Place>) {
      plan.add_place(std::move(node));
    } else {
      plan.add_transition(std::move(node));
    }
  }

  void item(VPlan& plan, std::vector<PendingArc>& arcs) {
    const Token& head = peek();
    if (head.is_word("place")) {
      take();
      const Token id = expect_ident("place id");
      Place place{id.text, std::nullopt};
      if (peek().is_punct(":")) {
        take();
        expect_word("subplan");
        place.subplan = expect_ident("subplan name").text;
      }
      expect_punct(";");
      add_node(plan, id, std::move(place));
    } else if (head.is_word("transition")) {
      transition(plan, {});
    } else if (head.is_word("arc")) {
      take();
      const Token from = expect_ident("arc source");
      expect_punct("->");
      const Token to = expect_ident("arc target");
      expect_punct(";");
      arcs.push_back({from, to});
    } else if (head.kind == Tok::at_word) {
      std::vector<Annotation> annotations;
      while (peek().kind == Tok::at_word) annotations.push_back(annotation());
      if (!peek().is_word("transition")) {
        throw SyntaxError{peek(), "annotation must precede a transition, found " + describe(peek())};
      }
      transition(plan, std::move(annotations));
    } else {
      throw SyntaxError{head, "expected 'place', 'transition', 'arc' or an annotation, found " +
                                  describe(head)};
    }
  }

  Annotation annotation() {
    const Token head = take();
    if (head.text == "@on_event") {
      expect_punct("(");
      expect_word("event");
      expect_punct("=");
      if (peek().kind != Tok::string) {
        throw SyntaxError{peek(), "expected event name string, found " + describe(peek())};
      }
      std::string event = take().text;
      expect_punct(",");
      expect_word("action");
      expect_punct("=");
      const Token action_tok = expect_ident("action");
      auto action = parse_event_action(action_tok.text);
      if (!action) {
        throw SyntaxError{action_tok, "action must be interrupt, skip or retry, found '" +
                                          action_tok.text + "'"};
      }
      expect_punct(")");
      return Annotation::on_event(std::move(event), *action);
    }
    if (head.text == "@args_doc") {
      expect_punct("(");
      if (peek().kind != Tok::string) {
        throw SyntaxError{peek(), "expected documentation string, found " + describe(peek())};
      }
      std::string doc = take().text;
      expect_punct(")");
      return Annotation::args_doc(std::move(doc));
    }
    throw SyntaxError{head, "unknown annotation '" + head.text + "'"};
  }

  void transition(VPlan& plan, std::vector<Annotation> annotations) {
    take();  // 'transition'
    const Token id = expect_ident("transition id");
    Transition t{id.text, std::nullopt, std::move(annotations), {}};
    if (peek().is_word("calls")) {
      take();
      TaskCall call;
      call.module = expect_ident("module name").text;
      expect_punct("(");
      std::set<std::string> keys;
      if (!peek().is_punct(")")) {
        while (true) {
          const Token key = expect_ident("argument name");
          expect_punct("=");
          const Token& value = peek();
          if (value.kind != Tok::string && value.kind != Tok::ident && value.kind != Tok::number) {
            throw SyntaxError{value, "expected argument value, found " + describe(value)};
          }
          take();
          if (!keys.insert(key.text).second) {
            error("PX-02", plan.name(), key, "duplicate argument '" + key.text + "'", id.text);
          } else {
            call.args.emplace_back(key.text, value.text);
          }
          if (peek().is_punct(",")) {
            take();
            continue;
          }
          break;
        }
      }
      expect_punct(")");
      t.call = std::move(call);
    }
    expect_punct(";");
    add_node(plan, id, std::move(t));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ParseResult& result_;
  bool seen_main_ = false;
};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

bool is_number(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') ++i;
  std::size_t digits = i;
  while (i < s.size() && digit(s[i])) ++i;
  if (i == digits) return false;
  if (i < s.size() && s[i] == '.') {
    std::size_t frac = ++i;
    while (i < s.size() && digit(s[i])) ++i;
    if (i == frac) return false;
  }
  return i == s.size();
}

std::string transition_line(const Transition& t) {
  std::string line;
  for (const auto& a : t.annotations) {
    if (a.kind == Annotation::Kind::on_event) {
      line += "@on_event(event=" + quote(a.event) + ", action=" + std::string(to_string(a.action)) +
              ") ";
    } else {
      line += "@args_doc(" + quote(a.text) + ") ";
    }
  }
  line += "transition " + t.id;
  if (t.call) {
    line += " calls " + t.call->module + "(";
    for (std::size_t i = 0; i < t.call->args.size(); ++i) {
      if (i > 0) line += ", ";
      line += t.call->args[i].first + "=" + format_value(t.call->args[i].second);
    }
    line += ")";
  }
  line += ";";
  return line;
}

void emit_plan(const VPlan& plan, bool is_main, std::vector<std::string>& lines) {
  lines.push_back("vplan " + plan.name() + (is_main ? " main {" : " {"));
  for (const auto& p : plan.places()) {
    lines.push_back("place " + p.id + (p.subplan ? " : subplan " + *p.subplan : "") + ";");
  }
  for (const auto& t : plan.transitions()) lines.push_back(transition_line(t));
  for (const auto& a : plan.arcs()) lines.push_back("arc " + a.from + "->" + a.to + ";");
  lines.push_back("}");
}

}  // namespace

bool is_identifier(std::string_view text) {
  if (text.empty() || !ident_start(text.front())) return false;
  return std::all_of(text.begin(), text.end(), ident_char);
}

std::string format_value(std::string_view value) {
  if (is_identifier(value) || is_number(value)) return std::string(value);
  return quote(value);
}

ParseResult parse(std::string_view text) {
  ParseResult result;
  std::vector<Token> tokens = Lexer(text).run(result.comments);
  Parser parser(std::move(tokens), result);
  parser.document();
  return result;
}

std::string serialize(const PlanSet& set, const std::vector<Comment>& comments) {
  // Lines are collected unindented; a comment marker keeps its text apart.
  struct Line {
    std::string text;
    bool comment = false;
  };
  std::vector<Line> lines;
  {
    std::vector<std::string> raw;
    bool first = true;
    auto add = [&](const VPlan& plan, bool is_main) {
      if (!first) raw.emplace_back();
      first = false;
      emit_plan(plan, is_main, raw);
    };
    if (const VPlan* main = set.find(set.main)) add(*main, true);
    for (const auto& plan : set.plans) {
      if (plan.name() != set.main) add(plan, false);
    }
    for (auto& r : raw) lines.push_back({std::move(r), false});
  }

  std::vector<Comment> sorted = comments;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Comment& a, const Comment& b) { return a.line < b.line; });
  for (const auto& c : sorted) {
    Line entry{"#" + c.text, true};
    const auto pos = static_cast<std::size_t>(std::max(c.line, 1) - 1);
    if (pos <= lines.size()) {
      lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(pos), std::move(entry));
      continue;
    }
    // Out of range: keep it inside the last plan block.
    auto close = std::find_if(lines.rbegin(), lines.rend(),
                              [](const Line& l) { return !l.comment && l.text == "}"; });
    if (close == lines.rend()) {
      lines.push_back(std::move(entry));
    } else {
      lines.insert(std::prev(close.base()), std::move(entry));
    }
  }

  std::string out;
  int depth = 0;
  for (const auto& l : lines) {
    if (!l.comment && l.text == "}") depth = 0;
    if (!l.text.empty()) out.append(static_cast<std::size_t>(depth) * 2, ' ');
    out += l.text;
    out += '\n';
    if (!l.comment && l.text.rfind("vplan ", 0) == 0) depth = 1;
  }
  return out;
}

}  // namespace vflow::text
