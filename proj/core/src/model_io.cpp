#include "hetfit/model_io.hpp"

#include <cstddef>

#include "hetfit/error.hpp"
#include "hetfit/text.hpp"

namespace hetfit {

Eigen::MatrixXd Surrogate::predict_scaled(
    const Eigen::MatrixXd& scaled_inputs) const {
  return net.forward_batch(scaled_inputs);
}

Eigen::MatrixXd Surrogate::predict_real(const Eigen::MatrixXd& real_inputs) const {
  return output_scaler.unscale(net.forward_batch(input_scaler.scale(real_inputs)));
}

namespace {

void append_values(std::string& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    out += ' ';
    out += text::format_double(data[i]);
  }
}

void append_block(std::string& out, std::string_view key,
                  const std::vector<std::string>& names,
                  const ScalerParams& scaler) {
  out += key;
  out += ' ';
  out += std::to_string(names.size());
  for (const auto& n : names) out += ' ' + n;
  out += '\n';
  for (const auto& r : scaler.ranges()) {
    out += "range " + r.name + ' ' + text::format_double(r.min) + ' ' +
           text::format_double(r.max) + '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::string_view content) : lines_(text::lines(content)) {}

  std::vector<std::string> next(std::string_view expected_key) {
    while (pos_ < lines_.size() && text::trim(lines_[pos_]).empty()) ++pos_;
    if (pos_ >= lines_.size()) {
      throw ParseError("model file truncated: expected '" +
                           std::string(expected_key) + "'",
                       pos_ + 1, 0);
    }
    auto tokens = text::split(text::trim(lines_[pos_]), ' ');
    ++pos_;
    if (tokens.empty() || tokens.front() != expected_key) {
      throw ParseError("model file line " + std::to_string(pos_) +
                           ": expected '" + std::string(expected_key) + "'",
                       pos_, 0);
    }
    return tokens;
  }

  std::size_t line() const { return pos_; }

  std::string_view first() const {
    return lines_.empty() ? std::string_view{} : text::trim(lines_.front());
  }
  void skip_first() { pos_ = 1; }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

std::size_t to_count(const std::string& token, std::size_t line) {
  const auto v = text::parse_double(token);
  if (!v || *v < 0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
    throw ParseError("model file line " + std::to_string(line) +
                         ": bad count '" + token + "'",
                     line, 0);
  }
  return static_cast<std::size_t>(*v);
}

double to_number(const std::string& token, std::size_t line) {
  const auto v = text::parse_double(token);
  if (!v) {
    throw ParseError("model file line " + std::to_string(line) +
                         ": bad number '" + token + "'",
                     line, 0);
  }
  return *v;
}

void read_block(Reader& in, std::string_view key,
                std::vector<std::string>& names, ScalerParams& scaler) {
  const auto head = in.next(key);
  if (head.size() < 2) throw ParseError("missing count", in.line(), 0);
  const auto n = to_count(head[1], in.line());
  if (head.size() != n + 2) {
    throw ParseError("model file line " + std::to_string(in.line()) +
                         ": name count mismatch",
                     in.line(), 0);
  }
  names.assign(head.begin() + 2, head.end());
  std::vector<FeatureRange> ranges;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = in.next("range");
    if (t.size() != 4) throw ParseError("malformed range line", in.line(), 0);
    ranges.push_back({t[1], to_number(t[2], in.line()), to_number(t[3], in.line())});
  }
  scaler = ScalerParams(std::move(ranges));
}

}  // namespace

std::string serialize_model(const Surrogate& model) {
  if (model.input_names.size() != model.input_scaler.size() ||
      model.output_names.size() != model.output_scaler.size()) {
    throw ShapeError("surrogate names and scaler ranges disagree");
  }
  std::string out(kModelFormatTag);
  out += '\n';
  append_block(out, "inputs", model.input_names, model.input_scaler);
  append_block(out, "outputs", model.output_names, model.output_scaler);
  out += "layers " + std::to_string(model.net.depth()) + '\n';
  for (const auto& l : model.net.layers()) {
    out += "layer " + std::to_string(l.fan_in()) + ' ' +
           std::to_string(l.fan_out()) + ' ' +
           std::string(nn::to_string(l.activation)) + '\n';
    // Row-major regardless of Eigen's column-major storage.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
        w = l.weights;
    out += "weights";
    append_values(out, w.data(), w.size());
    out += "\nbias";
    append_values(out, l.bias.data(), l.bias.size());
    out += '\n';
  }
  out += "end\n";
  return out;
}

Surrogate parse_model(std::string_view content) {
  Reader in(content);
  if (in.first() != kModelFormatTag) {
    throw VersionError("unsupported model file version: expected '" +
                       std::string(kModelFormatTag) + "', found '" +
                       std::string(in.first()) + "'");
  }
  in.skip_first();
  Surrogate m;
  read_block(in, "inputs", m.input_names, m.input_scaler);
  read_block(in, "outputs", m.output_names, m.output_scaler);
  const auto head = in.next("layers");
  if (head.size() != 2) throw ParseError("malformed layers line", in.line(), 0);
  const auto depth = to_count(head[1], in.line());
  std::vector<nn::DenseLayer> layers;
  for (std::size_t k = 0; k < depth; ++k) {
    const auto t = in.next("layer");
    if (t.size() != 4) throw ParseError("malformed layer line", in.line(), 0);
    const auto fan_in = static_cast<Eigen::Index>(to_count(t[1], in.line()));
    const auto fan_out = static_cast<Eigen::Index>(to_count(t[2], in.line()));
    const auto act = nn::parse_activation(t[3]);
    if (!act) {
      throw ParseError("unknown activation '" + t[3] + "'", in.line(), 0);
    }
    nn::DenseLayer layer;
    layer.activation = *act;
    const auto w = in.next("weights");
    if (static_cast<Eigen::Index>(w.size()) != fan_in * fan_out + 1) {
      throw ParseError("weight count mismatch", in.line(), 0);
    }
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) {
        layer.weights(r, c) =
            to_number(w[static_cast<std::size_t>(1 + r * fan_in + c)], in.line());
      }
    }
    const auto b = in.next("bias");
    if (static_cast<Eigen::Index>(b.size()) != fan_out + 1) {
      throw ParseError("bias count mismatch", in.line(), 0);
    }
    layer.bias.resize(fan_out);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      layer.bias(r) = to_number(b[static_cast<std::size_t>(r + 1)], in.line());
    }
    layers.push_back(std::move(layer));
  }
  in.next("end");
  m.net = nn::Mlp(std::move(layers));
  if (m.net.input_dim() != static_cast<int>(m.input_names.size()) ||
      m.net.output_dim() != static_cast<int>(m.output_names.size())) {
    throw ShapeError("model file network dimensions disagree with its header");
  }
  return m;
}

void save_model(const Surrogate& model, const std::string& path) {
  text::write_file(path, serialize_model(model));
}

Surrogate load_model(const std::string& path) {
  return parse_model(text::read_file(path));
}

}  // namespace hetfit
