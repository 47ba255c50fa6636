#include "vflow/repository.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "vflow/error.hpp"
#include "vflow/text.hpp"

namespace vflow {

namespace {

struct Placeholder {
  std::string name;
  bool ok = true;
};

// Scans `{name}` placeholders. A '{' without a matching '}' yields ok=false.
std::vector<Placeholder> placeholders(std::string_view tmpl) {
  std::vector<Placeholder> out;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    std::size_t close = tmpl.find('}', pos + 1);
    if (close == std::string_view::npos) {
      out.push_back({std::string(tmpl.substr(pos)), false});
      break;
    }
    out.push_back({std::string(tmpl.substr(pos + 1, close - pos - 1)), true});
    pos = close + 1;
  }
  return out;
}

std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, Value>>& args) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    std::size_t close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const std::string_view name = tmpl.substr(open + 1, close - open - 1);
    for (const auto& [k, v] : args) {
      if (k == name) {
        out += to_string(v);
        break;
      }
    }
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

void check_templates(const RepositoryEntry& entry, const std::string& where) {
  auto check = [&](std::string_view tmpl) {
    for (const auto& ph : placeholders(tmpl)) {
      if (!ph.ok) {
        throw Error(ErrorCode::BadTemplate,
                    where + "unterminated placeholder in '" + std::string(tmpl) + "'");
      }
      if (entry.find_param(ph.name) == nullptr) {
        throw Error(ErrorCode::BadTemplate, where + "placeholder {" + ph.name +
                                                "} names no declared param of " + entry.name);
      }
    }
  };
  for (const auto& op : entry.provider_ops) {
    for (const auto& [key, tmpl] : op.params) check(tmpl);
  }
  if (entry.command) check(*entry.command);
}

void check_entry(const RepositoryEntry& entry, const std::string& where) {
  auto syntax = [&](const std::string& msg) { throw Error(ErrorCode::ManifestSyntax, where + msg); };
  if (!text::is_identifier(entry.name)) syntax("entry name '" + entry.name + "' is not an identifier");
  std::set<std::string> names;
  for (const auto& p : entry.params) {
    if (!text::is_identifier(p.name)) syntax("param name '" + p.name + "' is not an identifier");
    if (!names.insert(p.name).second) syntax("duplicate param '" + p.name + "' in " + entry.name);
    if (p.required && p.default_value) syntax("required param '" + p.name + "' has a default");
    if (p.default_value && !parse_value(p.type, *p.default_value)) {
      syntax("default of '" + p.name + "' is not a valid " + std::string(to_string(p.type)));
    }
  }
  if (entry.kind == EntryKind::external_command && (!entry.command || entry.command->empty())) {
    syntax("external_command entry " + entry.name + " needs a non-empty command");
  }
  if (entry.kind == EntryKind::builtin && entry.command) {
    syntax("builtin entry " + entry.name + " cannot carry a command");
  }
  check_templates(entry, where);
}

// --- manifest lexing -------------------------------------------------------

struct Field {
  std::string key;  // empty for bare words
  std::string value;
};

std::vector<Field> split_fields(std::string_view line, const std::string& where) {
  std::vector<Field> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::string word;
    bool quoted = false;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
      if (line[i] == '"') {
        quoted = true;
        ++i;
        bool closed = false;
        while (i < line.size()) {
          if (line[i] == '\\' && i + 1 < line.size()) {
            word += line[i + 1];
            i += 2;
            continue;
          }
          if (line[i] == '"') {
            closed = true;
            ++i;
            break;
          }
          word += line[i++];
        }
        if (!closed) throw Error(ErrorCode::ManifestSyntax, where + "unterminated string");
        continue;
      }
      word += line[i++];
    }
    Field f;
    // key=value, where the key part was not quoted
    auto eq = word.find('=');
    if (eq != std::string::npos && eq > 0 && text::is_identifier(word.substr(0, eq))) {
      f.key = word.substr(0, eq);
      f.value = word.substr(eq + 1);
    } else {
      if (quoted) throw Error(ErrorCode::ManifestSyntax, where + "unexpected string literal");
      f.value = word;
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string manifest_value(std::string_view v) {
  if (v.empty()) return "\"\"";
  for (char c : v) {
    if (c == ' ' || c == '\t' || c == '"' || c == '#' || c == '\\') return quote(v);
  }
  return std::string(v);
}

}  // namespace

std::string_view to_string(ParamType type) {
  switch (type) {
    case ParamType::integer: return "int";
    case ParamType::string: return "string";
    case ParamType::boolean: return "bool";
  }
  return "string";
}

std::string_view to_string(EntryKind kind) {
  return kind == EntryKind::builtin ? "builtin" : "external_command";
}

std::string to_string(const Value& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
  if (const auto* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  return std::get<std::string>(value);
}

const ParamSpec* RepositoryEntry::find_param(std::string_view name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::optional<Value> parse_value(ParamType type, std::string_view text) {
  switch (type) {
    case ParamType::string: return Value{std::string(text)};
    case ParamType::boolean:
      if (text == "true") return Value{true};
      if (text == "false") return Value{false};
      return std::nullopt;
    case ParamType::integer: {
      std::string_view digits = text;
      if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size()) {
        return std::nullopt;
      }
      return Value{v};
    }
  }
  return std::nullopt;
}

std::vector<ArgIssue> check_args(const RepositoryEntry& entry, const TaskCall& call) {
  std::vector<ArgIssue> issues;
  for (const auto& [key, value] : call.args) {
    const ParamSpec* spec = entry.find_param(key);
    if (spec == nullptr) {
      issues.push_back({ArgIssueKind::unknown_arg, key,
                        entry.name + " has no parameter '" + key + "'"});
    } else if (!parse_value(spec->type, value)) {
      issues.push_back({ArgIssueKind::type_mismatch, key,
                        "argument " + key + "=\"" + value + "\" is not a valid " +
                            std::string(to_string(spec->type))});
    }
  }
  for (const auto& spec : entry.params) {
    if (spec.required && call.find_arg(spec.name) == nullptr) {
      issues.push_back({ArgIssueKind::missing_required, spec.name,
                        entry.name + " requires argument '" + spec.name + "'"});
    }
  }
  return issues;
}

BoundTask bind(const RepositoryEntry& entry, const TaskCall& call) {
  auto issues = check_args(entry, call);
  if (!issues.empty()) {
    const ArgIssue& first = issues.front();
    ErrorCode code = ErrorCode::TypeMismatch;
    if (first.kind == ArgIssueKind::missing_required) code = ErrorCode::MissingRequired;
    if (first.kind == ArgIssueKind::unknown_arg) code = ErrorCode::UnknownArg;
    throw Error(code, first.message);
  }

  BoundTask task;
  task.module = entry.name;
  for (const auto& spec : entry.params) {
    const std::string* supplied = call.find_arg(spec.name);
    if (supplied != nullptr) {
      task.args.emplace_back(spec.name, *parse_value(spec.type, *supplied));
    } else if (spec.default_value) {
      task.args.emplace_back(spec.name, *parse_value(spec.type, *spec.default_value));
    }
  }
  for (const auto& tmpl : entry.provider_ops) {
    cloud::ProviderOp op;
    op.op = tmpl.op;
    for (const auto& [key, value] : tmpl.params) op.params[key] = substitute(value, task.args);
    task.provider_ops.push_back(std::move(op));
  }
  if (entry.command) task.command = substitute(*entry.command, task.args);
  return task;
}

// ---------------------------------------------------------------------------
// Repository

void Repository::add(RepositoryEntry entry) {
  check_entry(entry, "");
  if (find(entry.name) != nullptr) {
    throw Error(ErrorCode::DuplicateEntry, "duplicate repository entry '" + entry.name + "'");
  }
  entries_.push_back(std::move(entry));
}

const RepositoryEntry* Repository::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const RepositoryEntry& Repository::lookup(std::string_view name) const {
  const RepositoryEntry* e = find(name);
  if (e == nullptr) {
    throw Error(ErrorCode::NotFound, "repository has no entry '" + std::string(name) + "'");
  }
  return *e;
}

Repository Repository::load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.string());
}

Repository Repository::parse_manifest(std::string_view text, std::string source) {
  Repository repo;
  repo.source_ = source;

  std::optional<RepositoryEntry> current;
  int current_line = 0;
  auto finish = [&] {
    if (!current) return;
    const std::string where = source + ":" + std::to_string(current_line) + ": ";
    check_entry(*current, where);
    if (repo.find(current->name) != nullptr) {
      throw Error(ErrorCode::DuplicateEntry, where + "duplicate entry '" + current->name + "'");
    }
    repo.entries_.push_back(std::move(*current));
    current.reset();
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    auto fields = split_fields(line, where);
    if (fields.empty()) continue;
    const bool indented = line.front() == ' ' || line.front() == '\t';
    const std::string& head = fields[0].value;
    auto syntax = [&](const std::string& msg) {
      throw Error(ErrorCode::ManifestSyntax, where + msg);
    };
    if (!fields[0].key.empty()) syntax("expected 'entry', 'param' or 'op'");

    if (head == "entry") {
      if (indented) syntax("'entry' must start at column 1");
      finish();
      if (fields.size() < 2 || !fields[1].key.empty()) syntax("expected entry name");
      RepositoryEntry e;
      e.name = fields[1].value;
      bool kind_seen = false;
      for (std::size_t i = 2; i < fields.size(); ++i) {
        const auto& f = fields[i];
        if (f.key == "kind") {
          kind_seen = true;
          if (f.value == "builtin") {
            e.kind = EntryKind::builtin;
          } else if (f.value == "external_command") {
            e.kind = EntryKind::external_command;
          } else {
            syntax("unknown kind '" + f.value + "'");
          }
        } else if (f.key == "command") {
          e.command = f.value;
        } else {
          syntax("unexpected field '" + (f.key.empty() ? f.value : f.key) + "'");
        }
      }
      if (!kind_seen) syntax("entry " + e.name + " needs kind=");
      current = std::move(e);
      current_line = line_no;
    } else if (head == "param") {
      if (!current) syntax("'param' outside an entry");
      if (!indented) syntax("'param' must be indented");
      if (fields.size() < 2 || !fields[1].key.empty()) syntax("expected param name");
      ParamSpec p;
      p.name = fields[1].value;
      bool type_seen = false;
      for (std::size_t i = 2; i < fields.size(); ++i) {
        const auto& f = fields[i];
        if (f.key == "type") {
          type_seen = true;
          if (f.value == "int") {
            p.type = ParamType::integer;
          } else if (f.value == "string") {
            p.type = ParamType::string;
          } else if (f.value == "bool") {
            p.type = ParamType::boolean;
          } else {
            syntax("unknown type '" + f.value + "'");
          }
        } else if (f.key == "default") {
          p.default_value = f.value;
        } else if (f.key.empty() && f.value == "required") {
          p.required = true;
        } else {
          syntax("unexpected field '" + (f.key.empty() ? f.value : f.key) + "'");
        }
      }
      if (!type_seen) syntax("param " + p.name + " needs type=");
      current->params.push_back(std::move(p));
    } else if (head == "op") {
      if (!current) syntax("'op' outside an entry");
      if (!indented) syntax("'op' must be indented");
      if (fields.size() < 2 || !fields[1].key.empty()) syntax("expected provider op name");
      auto kind = cloud::parse_op_kind(fields[1].value);
      if (!kind) syntax("unknown provider op '" + fields[1].value + "'");
      ProviderOpTemplate op;
      op.op = *kind;
      for (std::size_t i = 2; i < fields.size(); ++i) {
        if (fields[i].key.empty()) syntax("op parameters must be key=value");
        op.params.emplace_back(fields[i].key, fields[i].value);
      }
      current->provider_ops.push_back(std::move(op));
    } else {
      syntax("expected 'entry', 'param' or 'op', found '" + head + "'");
    }
  }
  finish();
  return repo;
}

std::string Repository::save_manifest() const {
  std::string out;
  for (const auto& e : entries_) {
    out += "entry " + e.name + " kind=" + std::string(to_string(e.kind));
    if (e.command) out += " command=" + quote(*e.command);
    out += '\n';
    for (const auto& p : e.params) {
      out += "  param " + p.name + " type=" + std::string(to_string(p.type));
      if (p.required) out += " required";
      if (p.default_value) {
        out += " default=" +
               (p.type == ParamType::string ? quote(*p.default_value) : *p.default_value);
      }
      out += '\n';
    }
    for (const auto& op : e.provider_ops) {
      out += "  op " + std::string(cloud::to_string(op.op));
      for (const auto& [k, v] : op.params) out += " " + k + "=" + manifest_value(v);
      out += '\n';
    }
  }
  return out;
}

void Repository::save_manifest(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
  out << save_manifest();
}

}  // namespace vflow
