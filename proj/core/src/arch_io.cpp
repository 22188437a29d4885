#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "ssa/arch.hpp"
#include "ssa/errors.hpp"

namespace ssa {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class LineFields {
 public:
  LineFields(std::size_t line, std::map<std::string, std::string> fields)
      : line_(line), fields_(std::move(fields)) {}

  [[noreturn]] void fail(const std::string& message) const {
    throw SpecError("line " + std::to_string(line_) + ": " + message);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    auto it = fields_.find(key);
    if (it == fields_.end()) return fallback;
    std::string v = it->second;
    fields_.erase(it);
    return v;
  }

  std::size_t number(const std::string& key, std::size_t fallback) {
    auto it = fields_.find(key);
    if (it == fields_.end()) return fallback;
    const std::string v = it->second;
    fields_.erase(it);
    return parse_number(key, v);
  }

  bool flag(const std::string& key, bool fallback) {
    auto it = fields_.find(key);
    if (it == fields_.end()) return fallback;
    const std::string v = it->second;
    fields_.erase(it);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    fail(key + " must be 0/1 or true/false, got \"" + v + "\"");
  }

  std::vector<std::size_t> list(const std::string& key, std::vector<std::size_t> fallback) {
    auto it = fields_.find(key);
    if (it == fields_.end()) return fallback;
    const std::string v = it->second;
    fields_.erase(it);
    std::vector<std::size_t> out;
    if (v.empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
    return out;
  }

  std::array<std::size_t, 3> triple(const std::string& key, std::array<std::size_t, 3> fallback) {
    auto v = list(key, {fallback.begin(), fallback.end()});
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() != 3) fail(key + " needs 1 or 3 comma-separated values");
    return {v[0], v[1], v[2]};
  }

  void finish() const {
    if (!fields_.empty()) fail("unknown key \"" + fields_.begin()->first + "\"");
  }

 private:
  std::size_t parse_number(const std::string& key, const std::string& v) const {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
      fail(key + " must be a non-negative integer, got \"" + v + "\"");
    }
    return value;
  }

  std::size_t line_;
  std::map<std::string, std::string> fields_;
};

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string join(const std::array<std::size_t, 3>& values) {
  return join(std::vector<std::size_t>(values.begin(), values.end()));
}

BlockKind parse_kind(const LineFields& f, const std::string& text) {
  if (text == "basic") return BlockKind::Basic;
  if (text == "bottleneck") return BlockKind::Bottleneck;
  if (text == "resnext") return BlockKind::ResNeXtBottleneck;
  f.fail("block kind must be basic, bottleneck or resnext, got \"" + text + "\"");
}

}  // namespace

NetworkSpec parse_network_spec(std::istream& in) {
  NetworkSpec spec;
  spec.layers.clear();
  std::optional<SsaConfig> shift_cap;
  bool saw_head = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::stringstream tokens(raw);
    std::string token;
    std::string head_key, head_value;
    std::map<std::string, std::string> fields;
    while (tokens >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw SpecError("line " + std::to_string(line_no) + ": expected key=value, got \"" + token + "\"");
      }
      std::string key = token.substr(0, eq), value = token.substr(eq + 1);
      if (head_key.empty()) {
        head_key = key;
        head_value = value;
      } else if (!fields.emplace(key, value).second) {
        throw SpecError("line " + std::to_string(line_no) + ": duplicate key \"" + key + "\"");
      }
    }
    if (head_key.empty()) continue;
    LineFields f(line_no, std::move(fields));
    if (head_key == "name") {
      spec.name = head_value;
    } else if (head_key == "variant") {
      if (head_value == "ssa") {
        spec.variant = Variant::Ssa;
      } else if (head_value == "conv3d") {
        spec.variant = Variant::Conv3dReference;
      } else {
        f.fail("variant must be ssa or conv3d");
      }
    } else if (head_key == "input") {
      LineFields dims(line_no, {{"input", head_value}});
      const auto v = dims.list("input", {});
      if (v.size() != 4) f.fail("input needs c,f,h,w");
      spec.input = Shape5{1, v[0], v[1], v[2], v[3]};
    } else if (head_key == "shift_cap") {
      try {
        shift_cap = SsaConfig::parse(head_value);
      } catch (const SpecError& e) {
        f.fail(e.what());
      }
    } else if (head_key == "layer") {
      if (head_value == "conv") {
        ConvLayerSpec c;
        c.out_channels = f.number("out", c.out_channels);
        c.k = f.number("k", c.k);
        c.stride = f.number("stride", c.stride);
        c.padding = f.number("pad", c.k / 2);
        c.bias = f.flag("bias", c.bias);
        c.batch_norm = f.flag("bn", c.batch_norm);
        c.relu = f.flag("relu", c.relu);
        const std::string ssa = f.text("ssa", "all");
        if (ssa == "off" || ssa == "0" || ssa == "false") {
          c.ssa = false;
        } else {
          c.ssa = true;
          try {
            c.shift_cap = SsaConfig::parse(ssa == "1" || ssa == "true" ? "all" : ssa);
          } catch (const SpecError& e) {
            f.fail(e.what());
          }
        }
        c.planar = f.flag("planar", c.planar);
        spec.layers.emplace_back(c);
      } else if (head_value == "maxpool") {
        MaxPoolLayerSpec p;
        p.pool.kernel = f.triple("k", {2, 2, 2});
        p.pool.stride = f.triple("stride", p.pool.kernel);
        p.pool.padding = f.triple("pad", {0, 0, 0});
        spec.layers.emplace_back(p);
      } else if (head_value == "tpool") {
        TemporalPoolLayerSpec p;
        p.kernel = f.number("kernel", p.kernel);
        p.stride = f.number("stride", p.stride);
        spec.layers.emplace_back(p);
      } else if (head_value == "block") {
        BlockSpec b;
        b.kind = parse_kind(f, f.text("kind", "basic"));
        b.channels_in = f.number("in", b.channels_in);
        b.channels_out = f.number("out", b.channels_out);
        b.mid_channels = f.number("mid", b.mid_channels);
        b.groups = f.number("groups", b.groups);
        b.k = f.number("k", b.k);
        b.stride = f.number("stride", b.stride);
        b.temporal_pool_here = f.flag("tpool", b.temporal_pool_here);
        try {
          b.ssa = SsaConfig::parse(f.text("ssa", "all"));
        } catch (const SpecError& e) {
          f.fail(e.what());
        }
        spec.layers.emplace_back(b);
      } else {
        f.fail("unknown layer type \"" + head_value + "\"");
      }
    } else if (head_key == "head") {
      if (head_value == "avg") {
        spec.head.pooling = HeadSpec::Pooling::GlobalAverage;
      } else if (head_value == "flatten") {
        spec.head.pooling = HeadSpec::Pooling::Flatten;
      } else {
        f.fail("head must be avg or flatten");
      }
      spec.head.classes = f.number("classes", spec.head.classes);
      spec.head.hidden = f.list("hidden", {});
      saw_head = true;
    } else {
      f.fail("unknown key \"" + head_key + "\"");
    }
    f.finish();
  }
  if (!saw_head) throw SpecError("architecture file has no head= line");
  spec.sync_variant();
  if (shift_cap) spec.set_shift_cap(*shift_cap);
  spec.validate();
  return spec;
}

NetworkSpec parse_network_spec(const std::string& text) {
  std::istringstream in(text);
  return parse_network_spec(in);
}

NetworkSpec load_network_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open architecture file " + path);
  return parse_network_spec(in);
}

std::string format_network_spec(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "name=" << spec.name << '\n';
  out << "variant=" << to_string(spec.variant) << '\n';
  out << "input=" << spec.input.c << ',' << spec.input.f << ',' << spec.input.h << ','
      << spec.input.w << '\n';
  for (const auto& layer : spec.layers) {
    std::visit(Overloaded{
                   [&](const ConvLayerSpec& c) {
                     out << "layer=conv out=" << c.out_channels << " k=" << c.k
                         << " stride=" << c.stride << " pad=" << c.padding << " bias=" << c.bias
                         << " bn=" << c.batch_norm << " relu=" << c.relu
                         << " ssa=" << (c.ssa ? c.shift_cap.str() : std::string("off"))
                         << " planar=" << c.planar << '\n';
                   },
                   [&](const MaxPoolLayerSpec& p) {
                     out << "layer=maxpool k=" << join(p.pool.kernel)
                         << " stride=" << join(p.pool.stride) << " pad=" << join(p.pool.padding)
                         << '\n';
                   },
                   [&](const TemporalPoolLayerSpec& p) {
                     out << "layer=tpool kernel=" << p.kernel << " stride=" << p.stride << '\n';
                   },
                   [&](const BlockSpec& b) {
                     out << "layer=block kind=" << to_string(b.kind) << " in=" << b.channels_in
                         << " out=" << b.channels_out << " mid=" << b.mid_channels
                         << " groups=" << b.groups << " k=" << b.k << " stride=" << b.stride
                         << " tpool=" << b.temporal_pool_here << " ssa=" << b.ssa.str() << '\n';
                   },
               },
               layer);
  }
  out << "head=" << (spec.head.pooling == HeadSpec::Pooling::Flatten ? "flatten" : "avg")
      << " classes=" << spec.head.classes;
  if (!spec.head.hidden.empty()) out << " hidden=" << join(spec.head.hidden);
  out << '\n';
  return out.str();
}

}  // namespace ssa
