#include "nearfield/model_io.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "nearfield/errors.hpp"

namespace nearfield {

namespace {

constexpr const char* kMagic = "NFMODEL";
constexpr int kVersion = 1;

std::string vec3_text(const Vec3& v) {
  return detail::format_double(v.x()) + ' ' + detail::format_double(v.y()) + ' ' + detail::format_double(v.z());
}

class HeaderReader {
 public:
  explicit HeaderReader(std::istream& in) : in_(in) {}

  // Reads one line and checks its leading keyword.
  std::istringstream expect(const std::string& key) {
    line_offset_ = offset_;
    std::string line;
    if (!std::getline(in_, line)) throw FormatError("unexpected end of model header, wanted '" + key + "'", offset_);
    offset_ += line.size() + 1;
    std::istringstream s(line);
    std::string word;
    if (!(s >> word) || word != key) {
      throw FormatError("expected '" + key + "' in model header, found '" + line.substr(0, 40) + "'", line_offset_);
    }
    return s;
  }

  template <typename T>
  T value(std::istringstream& s, const std::string& what) {
    std::string token;
    if (!(s >> token)) throw FormatError("missing " + what, line_offset_);
    try {
      if constexpr (std::is_same_v<T, double>) {
        return detail::parse_double(token);
      } else {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return static_cast<T>(v);
      }
    } catch (const std::exception&) {
      throw FormatError("bad " + what + " '" + token + "'", line_offset_);
    }
  }

  void finish_line(std::istringstream& s) {
    std::string extra;
    if (s >> extra) throw FormatError("unexpected trailing field '" + extra + "'", line_offset_);
  }

  std::uint64_t offset() const { return offset_; }
  std::istream& stream() { return in_; }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
  std::uint64_t line_offset_ = 0;
};

}  // namespace

void write_model(LocatorModel& model, std::ostream& out) {
  const Architecture& a = model.architecture();
  out << kMagic << ' ' << kVersion << '\n';
  out << "input_size " << a.input_size << '\n';
  out << "num_sources " << a.num_sources << '\n';
  out << "filters " << a.filters[0] << ' ' << a.filters[1] << ' ' << a.filters[2] << ' ' << a.filters[3] << '\n';
  out << "fc " << a.hidden[0] << ' ' << a.hidden[1] << ' ' << a.hidden[2] << '\n';
  out << "pool " << a.pool_size << '\n';
  out << "dropout " << detail::format_double(a.dropout) << '\n';
  out << "activation " << to_string(a.output_activation) << '\n';
  out << "bn_epsilon " << detail::format_double(a.bn_epsilon) << '\n';
  out << "bn_momentum " << detail::format_double(a.bn_momentum) << '\n';
  out << "label_lo " << vec3_text(model.scaler().lo) << '\n';
  out << "label_hi " << vec3_text(model.scaler().hi) << '\n';
  const std::vector<StateRef> state = model.state();
  out << "tensors " << state.size() << '\n';
  for (const StateRef& s : state) out << "tensor " << s.name << ' ' << s.value.size() << '\n';
  out << "end\n";
  for (const StateRef& s : state) {
    for (double v : s.value) detail::write_le(out, v);
  }
  if (!out) throw std::runtime_error("failed writing model");
}

void write_model(LocatorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_model(model, out);
}

LocatorModel read_model(std::istream& in) {
  HeaderReader h(in);
  {
    auto s = h.expect(kMagic);
    if (h.value<int>(s, "model version") != kVersion) throw FormatError("unsupported model version", 0);
  }
  Architecture a;
  LabelScaler scaler;
  auto line = h.expect("input_size");
  a.input_size = h.value<std::size_t>(line, "input_size");
  h.finish_line(line);
  line = h.expect("num_sources");
  a.num_sources = h.value<std::size_t>(line, "num_sources");
  h.finish_line(line);
  line = h.expect("filters");
  for (std::size_t& f : a.filters) f = h.value<std::size_t>(line, "filter count");
  h.finish_line(line);
  line = h.expect("fc");
  for (std::size_t& f : a.hidden) f = h.value<std::size_t>(line, "dense width");
  h.finish_line(line);
  line = h.expect("pool");
  a.pool_size = h.value<std::size_t>(line, "pool size");
  h.finish_line(line);
  line = h.expect("dropout");
  a.dropout = h.value<double>(line, "dropout");
  h.finish_line(line);
  {
    const std::uint64_t at = h.offset();
    line = h.expect("activation");
    std::string name;
    line >> name;
    try {
      a.output_activation = parse_output_activation(name);
    } catch (const std::exception&) {
      throw FormatError("unknown output activation '" + name + "'", at);
    }
    h.finish_line(line);
  }
  line = h.expect("bn_epsilon");
  a.bn_epsilon = h.value<double>(line, "bn_epsilon");
  h.finish_line(line);
  line = h.expect("bn_momentum");
  a.bn_momentum = h.value<double>(line, "bn_momentum");
  h.finish_line(line);
  line = h.expect("label_lo");
  for (int i = 0; i < 3; ++i) scaler.lo[i] = h.value<double>(line, "label bound");
  h.finish_line(line);
  line = h.expect("label_hi");
  for (int i = 0; i < 3; ++i) scaler.hi[i] = h.value<double>(line, "label bound");
  h.finish_line(line);

  const std::uint64_t arch_offset = h.offset();
  try {
    a.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("invalid architecture in model header: ") + e.what(), arch_offset);
  }
  LocatorModel model(a, scaler);
  std::vector<StateRef> state = model.state();

  line = h.expect("tensors");
  const auto count = h.value<std::size_t>(line, "tensor count");
  h.finish_line(line);
  if (count != state.size()) {
    throw FormatError("model declares " + std::to_string(count) + " tensors, architecture has " +
                          std::to_string(state.size()),
                      arch_offset);
  }
  for (const StateRef& s : state) {
    const std::uint64_t at = h.offset();
    line = h.expect("tensor");
    std::string name;
    line >> name;
    const auto len = h.value<std::size_t>(line, "tensor length");
    h.finish_line(line);
    if (name != s.name || len != s.value.size()) {
      throw FormatError("tensor table entry '" + name + "' (" + std::to_string(len) + ") does not match '" + s.name +
                            "' (" + std::to_string(s.value.size()) + ")",
                        at);
    }
  }
  line = h.expect("end");
  h.finish_line(line);

  std::uint64_t offset = h.offset();
  for (std::size_t t = 0; t < state.size(); ++t) {
    for (double& v : state[t].value) {
      if (!detail::read_le(in, v)) {
        throw FormatError("truncated model payload in tensor '" + state[t].name + "'", offset + in.gcount());
      }
      offset += sizeof(double);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model payload", offset);
  return model;
}

LocatorModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model(in);
}

}  // namespace nearfield
