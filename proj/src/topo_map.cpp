#include "guide/topo_map.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace guide {

namespace {

bool is_id_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '-';
}

bool is_tag_token(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

struct Token {
  std::string text;
  int column = 1;
  bool quoted = false;  // text contained a quoted section (label values)
};

// Splits one line on whitespace, honoring "..." with \" and \\ escapes. Stops at
// an unquoted '#'.
std::vector<Token> tokenize(std::string_view line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    Token tok;
    tok.column = static_cast<int>(i) + 1;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
      if (line[i] == '"') {
        tok.quoted = true;
        const std::size_t open = i++;
        bool closed = false;
        while (i < line.size()) {
          if (line[i] == '\\' && i + 1 < line.size()) {
            tok.text.push_back(line[i + 1]);
            i += 2;
          } else if (line[i] == '"') {
            closed = true;
            ++i;
            break;
          } else {
            tok.text.push_back(line[i++]);
          }
        }
        if (!closed) {
          throw MapParseError(line_no, static_cast<int>(open) + 1, "unterminated quoted string");
        }
      } else if (line[i] == '#') {
        break;
      } else {
        tok.text.push_back(line[i++]);
      }
    }
    out.push_back(std::move(tok));
  }
  return out;
}

double parse_real(const Token& tok, std::string_view text, int line_no) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw MapParseError(line_no, tok.column, "expected a finite real, got '" + std::string(text) + "'");
  }
  return v;
}

NodeId parse_id(const Token& tok, int line_no) {
  if (!NodeId::is_valid_token(tok.text) || tok.quoted) {
    throw MapParseError(line_no, tok.column, "invalid node id '" + tok.text + "'");
  }
  return NodeId(tok.text);
}

// key=value split; returns false when there is no '='.
bool split_kv(const std::string& s, std::string& key, std::string& value) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return false;
  key = s.substr(0, eq);
  value = s.substr(eq + 1);
  return true;
}

void add_tag(std::set<std::string>& tags, const Token& tok, const std::string& value, int line_no) {
  if (!is_tag_token(value)) {
    throw MapParseError(line_no, tok.column, "tag must be a lowercase token, got '" + value + "'");
  }
  if (!tags.insert(value).second) {
    throw MapParseError(line_no, tok.column, "duplicate tag '" + value + "'");
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

bool NodeId::is_valid_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_id_char);
}

Heading Heading::from_degrees(int degrees) {
  if (!is_quantized(degrees)) {
    throw std::invalid_argument("direction " + std::to_string(degrees) +
                                " is not one of 0, 90, 180, 270");
  }
  return Heading(degrees);
}

Heading Heading::rotated(int delta_degrees) const {
  if (delta_degrees % 90 != 0) throw std::invalid_argument("rotation must be a multiple of 90");
  const int d = ((degrees_ + delta_degrees) % 360 + 360) % 360;
  return Heading(d);
}

MapParseError::MapParseError(int line, int column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + what),
      line_(line),
      column_(column) {}

const Node& TopoMap::node(const NodeId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw MapLookupError("unknown node '" + id.str() + "'");
  return it->second;
}

const Edge* TopoMap::find_edge(const NodeId& from, const NodeId& to) const {
  auto it = edges_.find({from, to});
  return it == edges_.end() ? nullptr : &it->second;
}

void TopoMap::add_node(Node node) {
  if (!NodeId::is_valid_token(node.id.str())) {
    throw std::invalid_argument("invalid node id '" + node.id.str() + "'");
  }
  if (!std::isfinite(node.position.x) || !std::isfinite(node.position.y)) {
    throw std::invalid_argument("node '" + node.id.str() + "' has a non-finite coordinate");
  }
  for (const auto& t : node.tags) {
    if (!is_tag_token(t)) throw std::invalid_argument("tag must be a lowercase token: '" + t + "'");
  }
  NodeId key = node.id;
  if (!nodes_.emplace(std::move(key), std::move(node)).second) {
    throw std::invalid_argument("duplicate node id");
  }
}

void TopoMap::add_edge(Edge edge) {
  if (!has_node(edge.from) || !has_node(edge.to)) {
    throw std::invalid_argument("edge " + edge.from.str() + "->" + edge.to.str() +
                                " references an unknown node");
  }
  if (!(edge.distance > 0.0) || !std::isfinite(edge.distance)) {
    throw std::invalid_argument("edge distance must be finite and positive");
  }
  EdgeKey key{edge.from, edge.to};
  if (!edges_.emplace(std::move(key), std::move(edge)).second) {
    throw std::invalid_argument("duplicate edge");
  }
}

std::vector<Edge> TopoMap::neighbors(const NodeId& id) const {
  if (!has_node(id)) throw MapLookupError("unknown node '" + id.str() + "'");
  std::vector<Edge> out;
  for (auto it = edges_.lower_bound({id, NodeId()}); it != edges_.end() && it->first.first == id;
       ++it) {
    out.push_back(it->second);
  }
  return out;
}

const Edge* TopoMap::edge_towards(const NodeId& from, Heading direction) const {
  for (auto it = edges_.lower_bound({from, NodeId()}); it != edges_.end() && it->first.first == from;
       ++it) {
    if (it->second.direction == direction) return &it->second;
  }
  return nullptr;
}

void TopoMap::set_blocked(const NodeId& from, const NodeId& to, bool blocked) {
  auto it = edges_.find({from, to});
  if (it == edges_.end()) {
    throw MapLookupError("unknown edge " + from.str() + "->" + to.str());
  }
  it->second.blocked = blocked;
  if (auto rev = edges_.find({to, from}); rev != edges_.end()) rev->second.blocked = blocked;
}

TopoMap parse_map(std::string_view text) {
  TopoMap map;
  bool seen_header = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;

    const auto toks = tokenize(line, line_no);
    if (toks.empty()) continue;

    if (!seen_header) {
      if (toks.size() != 2 || toks[0].text != "MAP" || toks[1].text != "v1") {
        throw MapParseError(line_no, toks[0].column, "expected header 'MAP v1'");
      }
      seen_header = true;
      continue;
    }

    const std::string& directive = toks[0].text;
    if (directive == "NODE") {
      if (toks.size() < 4) throw MapParseError(line_no, toks[0].column, "NODE needs <id> <x> <y>");
      Node node;
      node.id = parse_id(toks[1], line_no);
      node.position.x = parse_real(toks[2], toks[2].text, line_no);
      node.position.y = parse_real(toks[3], toks[3].text, line_no);
      for (std::size_t i = 4; i < toks.size(); ++i) {
        std::string key, value;
        if (!split_kv(toks[i].text, key, value)) {
          throw MapParseError(line_no, toks[i].column, "unexpected token '" + toks[i].text + "'");
        }
        if (key == "tag") {
          add_tag(node.tags, toks[i], value, line_no);
        } else if (key == "label") {
          if (!toks[i].quoted) throw MapParseError(line_no, toks[i].column, "label must be quoted");
          if (node.label) throw MapParseError(line_no, toks[i].column, "duplicate label");
          node.label = value;
        } else {
          throw MapParseError(line_no, toks[i].column, "unknown NODE attribute '" + key + "'");
        }
      }
      if (map.has_node(node.id)) {
        throw MapParseError(line_no, toks[1].column, "duplicate node id '" + node.id.str() + "'");
      }
      map.add_node(std::move(node));
    } else if (directive == "EDGE") {
      if (toks.size() < 3) throw MapParseError(line_no, toks[0].column, "EDGE needs <from> <to>");
      Edge edge;
      edge.from = parse_id(toks[1], line_no);
      edge.to = parse_id(toks[2], line_no);
      if (!map.has_node(edge.from)) {
        throw MapParseError(line_no, toks[1].column, "edge references unknown node '" + edge.from.str() + "'");
      }
      if (!map.has_node(edge.to)) {
        throw MapParseError(line_no, toks[2].column, "edge references unknown node '" + edge.to.str() + "'");
      }
      bool have_dist = false, have_dir = false;
      for (std::size_t i = 3; i < toks.size(); ++i) {
        std::string key, value;
        if (!split_kv(toks[i].text, key, value)) {
          throw MapParseError(line_no, toks[i].column, "unexpected token '" + toks[i].text + "'");
        }
        const int value_col = toks[i].column + static_cast<int>(key.size()) + 1;
        if (key == "dist") {
          if (have_dist) throw MapParseError(line_no, toks[i].column, "duplicate dist");
          edge.distance = parse_real(toks[i], value, line_no);
          if (!(edge.distance > 0.0)) {
            throw MapParseError(line_no, value_col, "distance must be positive");
          }
          have_dist = true;
        } else if (key == "dir") {
          if (have_dir) throw MapParseError(line_no, toks[i].column, "duplicate dir");
          int deg = 0;
          auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), deg);
          if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw MapParseError(line_no, value_col, "direction must be an integer");
          }
          if (!Heading::is_quantized(deg)) {
            throw MapParseError(line_no, value_col,
                                "direction " + value + " is not quantized to 0, 90, 180 or 270");
          }
          edge.direction = Heading::from_degrees(deg);
          have_dir = true;
        } else if (key == "tag") {
          add_tag(edge.tags, toks[i], value, line_no);
        } else {
          throw MapParseError(line_no, toks[i].column, "unknown EDGE attribute '" + key + "'");
        }
      }
      if (!have_dist || !have_dir) {
        throw MapParseError(line_no, toks[0].column, "EDGE requires dist= and dir=");
      }
      if (map.find_edge(edge.from, edge.to)) {
        throw MapParseError(line_no, toks[1].column,
                            "duplicate edge " + edge.from.str() + "->" + edge.to.str());
      }
      map.add_edge(std::move(edge));
    } else if (directive == "MAP") {
      throw MapParseError(line_no, toks[0].column, "duplicate header");
    } else {
      throw MapParseError(line_no, toks[0].column, "unknown directive '" + directive + "'");
    }
  }
  if (!seen_header) throw MapParseError(1, 1, "missing header 'MAP v1'");
  return map;
}

TopoMap load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open map file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  TopoMap map = parse_map(ss.str());
  auto slash = path.find_last_of('/');
  std::string base = path.substr(slash == std::string::npos ? 0 : slash + 1);
  if (auto dot = base.rfind('.'); dot != std::string::npos) base.resize(dot);
  map.name = base;
  return map;
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string serialize_map(const TopoMap& map) {
  std::string out = "MAP v1\n";
  for (const auto& [id, node] : map.nodes()) {
    out += "NODE " + id.str() + " " + format_real(node.position.x) + " " +
           format_real(node.position.y);
    for (const auto& t : node.tags) out += " tag=" + t;
    if (node.label) out += " label=" + quote(*node.label);
    out += '\n';
  }
  for (const auto& [key, edge] : map.edges()) {
    out += "EDGE " + edge.from.str() + " " + edge.to.str() + " dist=" + format_real(edge.distance) +
           " dir=" + std::to_string(edge.direction.degrees());
    for (const auto& t : edge.tags) out += " tag=" + t;
    out += '\n';
  }
  return out;
}

TopoMap set_edge_blocked(const TopoMap& map, const NodeId& from, const NodeId& to, bool blocked) {
  TopoMap copy = map;
  copy.set_blocked(from, to, blocked);
  return copy;
}

std::vector<Edge> neighbors(const TopoMap& map, const NodeId& node) { return map.neighbors(node); }

Coordinate unit_step(Heading heading) {
  switch (heading.degrees()) {
    case 0: return {1.0, 0.0};
    case 90: return {0.0, 1.0};
    case 180: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

std::vector<Violation> validate_geometry(const TopoMap& map, double rel_tol) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
  std::vector<Violation> out;
  for (const auto& [key, edge] : map.edges()) {
    const Coordinate& p = map.node(edge.from).position;
    const Coordinate& q = map.node(edge.to).position;
    const Coordinate u = unit_step(edge.direction);
    const double dx = q.x - (p.x + edge.distance * u.x);
    const double dy = q.y - (p.y + edge.distance * u.y);
    const double residual = std::hypot(dx, dy);
    if (residual > rel_tol * std::max(edge.distance, 1.0)) {
      std::ostringstream msg;
      msg << "edge " << edge.from << "->" << edge.to << " (dist=" << format_real(edge.distance)
          << " dir=" << edge.direction.degrees() << ") misses its endpoint by "
          << format_real(residual) << " m";
      out.push_back({Violation::Kind::kPositionMismatch, key, residual, msg.str()});
    }
  }
  return out;
}

std::vector<Violation> reverse_edge_warnings(const TopoMap& map) {
  std::vector<Violation> out;
  for (const auto& [key, edge] : map.edges()) {
    if (!map.find_edge(edge.to, edge.from)) {
      out.push_back({Violation::Kind::kMissingReverse, key, 0.0,
                     "edge " + edge.from.str() + "->" + edge.to.str() + " has no reverse edge"});
    }
  }
  return out;
}

}  // namespace guide
