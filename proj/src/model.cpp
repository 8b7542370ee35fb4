#include "grafair/model.hpp"

#include "grafair/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace grafair {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoKl: return "no-kl";
    case Variant::NoSConcat: return "no-s-concat";
    case Variant::Deterministic: return "deterministic";
    case Variant::Vanilla: return "vanilla";
    case Variant::VanillaWoS: return "vanilla-wo-s";
  }
  return "full";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : all_variants()) {
    if (text == to_string(v)) return v;
  }
  throw Error(ErrorCode::UnknownVariant, "'" + std::string(text) + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> variants = {Variant::Vanilla,   Variant::VanillaWoS,
                                                Variant::Full,      Variant::NoKl,
                                                Variant::NoSConcat, Variant::Deterministic};
  return variants;
}

bool concatenates_sensitive(Variant v) {
  return v == Variant::Full || v == Variant::NoKl || v == Variant::Deterministic;
}

bool samples_latent(Variant v) {
  return v == Variant::Full || v == Variant::NoKl || v == Variant::NoSConcat;
}

bool uses_kl(Variant v) { return v == Variant::Full || v == Variant::NoSConcat; }

bool masks_sensitive_input(Variant v) { return v == Variant::VanillaWoS; }

Index GrafairModel::decoder_input_width() const {
  return dims.hidden_dim + (concatenates_sensitive(variant) ? 2 : 0);
}

std::vector<Matrix*> GrafairModel::parameters() {
  std::vector<Matrix*> out;
  for (auto& w : encoder_weights) out.push_back(&w);
  for (std::size_t k = 0; k < decoder_weights.size(); ++k) {
    out.push_back(&decoder_weights[k]);
    out.push_back(&decoder_biases[k]);
  }
  return out;
}

std::vector<const Matrix*> GrafairModel::parameters() const {
  std::vector<const Matrix*> out;
  for (const auto& w : encoder_weights) out.push_back(&w);
  for (std::size_t k = 0; k < decoder_weights.size(); ++k) {
    out.push_back(&decoder_weights[k]);
    out.push_back(&decoder_biases[k]);
  }
  return out;
}

void validate_dims(const ModelDims& dims) {
  if (dims.in_features <= 0) throw Error(ErrorCode::InvalidParameter, "model needs input features");
  if (dims.hidden_dim <= 0) throw Error(ErrorCode::InvalidParameter, "hidden_dim must be positive");
  if (dims.encoder_layers < 1 || dims.encoder_layers > 3) {
    throw Error(ErrorCode::InvalidParameter, "encoder_layers must be 1, 2 or 3");
  }
  if (dims.classifier_layers < 1 || dims.classifier_layers > 2) {
    throw Error(ErrorCode::InvalidParameter, "classifier_layers must be 1 or 2");
  }
  if (dims.classes < 2) throw Error(ErrorCode::InvalidParameter, "need at least two classes");
}

GrafairModel init_weights(const ModelDims& dims, Variant variant, std::uint64_t seed) {
  validate_dims(dims);
  GrafairModel m;
  m.variant = variant;
  m.dims = dims;
  std::mt19937_64 rng(seed);
  auto glorot = [&](Index fan_in, Index fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    return w;
  };
  Index width = dims.in_features;
  for (int l = 0; l < dims.encoder_layers; ++l) {
    m.encoder_weights.push_back(glorot(width, 2 * dims.hidden_dim));
    width = dims.hidden_dim;
  }
  width = m.decoder_input_width();
  for (int k = 0; k < dims.classifier_layers; ++k) {
    const bool last = k + 1 == dims.classifier_layers;
    const Index out = last ? dims.classes : dims.hidden_dim;
    m.decoder_weights.push_back(glorot(width, out));
    m.decoder_biases.push_back(Matrix::Zero(1, out));
    width = out;
  }
  return m;
}

std::vector<ad::Value> ParameterValues::flat() const {
  std::vector<ad::Value> out(encoder.begin(), encoder.end());
  for (std::size_t k = 0; k < decoder_weights.size(); ++k) {
    out.push_back(decoder_weights[k]);
    out.push_back(decoder_biases[k]);
  }
  return out;
}

ParameterValues bind_parameters(ad::Tape& tape, const GrafairModel& model, bool requires_grad) {
  std::vector<ad::Value> flat;
  for (const Matrix* p : model.parameters()) flat.push_back(tape.leaf(*p, requires_grad));
  return unflatten_parameters(model, flat);
}

ParameterValues unflatten_parameters(const GrafairModel& model, std::span<const ad::Value> flat) {
  const std::size_t enc = model.encoder_weights.size();
  const std::size_t dec = model.decoder_weights.size();
  if (flat.size() != enc + 2 * dec) {
    throw Error(ErrorCode::ShapeMismatch, "parameter list has " + std::to_string(flat.size()) +
                                              " entries, model needs " +
                                              std::to_string(enc + 2 * dec));
  }
  ParameterValues p;
  p.encoder.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(enc));
  for (std::size_t k = 0; k < dec; ++k) {
    p.decoder_weights.push_back(flat[enc + 2 * k]);
    p.decoder_biases.push_back(flat[enc + 2 * k + 1]);
  }
  return p;
}

Matrix encoder_input(const GrafairModel& model, const AttributedGraph& g) {
  if (g.num_features() != model.dims.in_features) {
    throw Error(ErrorCode::ShapeMismatch, "graph has " + std::to_string(g.num_features()) +
                                              " features, model expects " +
                                              std::to_string(model.dims.in_features));
  }
  if (!masks_sensitive_input(model.variant)) return g.features();
  Matrix x = g.features();
  x.col(g.sensitive_col()).setZero();
  return x;
}

PosteriorValues encode_on_tape(ad::Tape& tape, const GrafairModel& model,
                               const ParameterValues& params, const Matrix& input,
                               const NormalizedAdjacency& adj, const EncodeOptions& options,
                               std::mt19937_64& rng) {
  const Index f = model.dims.hidden_dim;
  const Index n = input.rows();
  const std::size_t layers = params.encoder.size();
  std::normal_distribution<double> normal(0.0, 1.0);

  PosteriorValues out;
  ad::Value h = tape.constant(input);
  for (std::size_t l = 0; l < layers; ++l) {
    const bool last = l + 1 == layers;
    ad::Value aggregated = ad::sparse_matmul(adj, ad::matmul(h, params.encoder[l]));
    ad::Value mu = ad::slice_cols(aggregated, 0, f);
    ad::Value variance = ad::softplus(ad::slice_cols(aggregated, f, f));
    ad::Value log_var = ad::log(variance);

    const bool draw = options.sample && samples_latent(model.variant) &&
                      (last || !options.final_layer_only);
    Matrix eps = Matrix::Zero(n, f);
    ad::Value z = mu;
    if (draw) {
      for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
      ad::Value sigma = ad::exp(ad::scalar_mul(0.5, log_var));
      z = ad::add(mu, ad::elementwise_mul(sigma, tape.constant(eps)));
    }
    if (last) {
      out.mu = mu;
      out.log_var = log_var;
      out.z = z;
      out.epsilon = std::move(eps);
    }
    h = z;
  }
  return out;
}

Matrix one_hot_sensitive(const BinaryVector& sensitive) {
  Matrix s(static_cast<Index>(sensitive.size()), 2);
  for (std::size_t i = 0; i < sensitive.size(); ++i) {
    s(static_cast<Index>(i), 0) = sensitive[i] ? 0.0 : 1.0;
    s(static_cast<Index>(i), 1) = sensitive[i] ? 1.0 : 0.0;
  }
  return s;
}

ad::Value decode_on_tape(ad::Tape& tape, const GrafairModel& model, const ParameterValues& params,
                         const ad::Value& z, const BinaryVector& sensitive) {
  if (static_cast<Index>(sensitive.size()) != z.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "decoder got " + std::to_string(z.rows()) +
                                              " representations and " +
                                              std::to_string(sensitive.size()) +
                                              " sensitive values");
  }
  ad::Value h = z;
  if (concatenates_sensitive(model.variant)) {
    h = ad::concat_cols(z, tape.constant(one_hot_sensitive(sensitive)));
  }
  const std::size_t layers = params.decoder_weights.size();
  for (std::size_t k = 0; k < layers; ++k) {
    h = ad::add(ad::matmul(h, params.decoder_weights[k]), params.decoder_biases[k]);
    if (k + 1 < layers) h = ad::relu(h);
  }
  return ad::softmax_rows(h);
}

EncodedPosterior encode(const GrafairModel& model, const AttributedGraph& g,
                        const NormalizedAdjacency& adj, bool sample, std::uint64_t rng_seed,
                        bool final_layer_only) {
  ad::Tape tape;
  const ParameterValues params = bind_parameters(tape, model, false);
  std::mt19937_64 rng(rng_seed);
  PosteriorValues post = encode_on_tape(tape, model, params, encoder_input(model, g), adj,
                                        {sample, final_layer_only}, rng);
  return {post.mu.data(), post.log_var.data(), post.z.data(), std::move(post.epsilon)};
}

Matrix decode(const GrafairModel& model, const EncodedPosterior& posterior,
              const BinaryVector& sensitive) {
  if (posterior.z.cols() != model.dims.hidden_dim) {
    throw Error(ErrorCode::ShapeMismatch, "representation width " +
                                              std::to_string(posterior.z.cols()) + " vs hidden " +
                                              std::to_string(model.dims.hidden_dim));
  }
  ad::Tape tape;
  const ParameterValues params = bind_parameters(tape, model, false);
  return decode_on_tape(tape, model, params, tape.constant(posterior.z), sensitive).data();
}

Matrix decode_marginal(const GrafairModel& model, const EncodedPosterior& posterior,
                       double p_sensitive) {
  const auto n = static_cast<std::size_t>(posterior.z.rows());
  if (!concatenates_sensitive(model.variant)) return decode(model, posterior, BinaryVector(n, 0));
  const Matrix p0 = decode(model, posterior, BinaryVector(n, 0));
  const Matrix p1 = decode(model, posterior, BinaryVector(n, 1));
  return (1.0 - p_sensitive) * p0 + p_sensitive * p1;
}

BinaryVector predict_labels(const Matrix& prob) {
  BinaryVector out(static_cast<std::size_t>(prob.rows()));
  for (Index i = 0; i < prob.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < prob.cols(); ++k) {
      if (prob(i, k) > prob(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

namespace {

void write_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << m(r, c);
    }
    os << '\n';
  }
}

[[noreturn]] void bad_checkpoint(const std::string& path, int line, const std::string& what) {
  throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void save_checkpoint(const std::string& path, const GrafairModel& model,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::MissingFile, "cannot write checkpoint " + path);
  os.precision(17);
  os << "grafair-checkpoint 1\n";
  os << "variant " << to_string(model.variant) << '\n';
  os << "dims " << model.dims.in_features << ' ' << model.dims.hidden_dim << ' '
     << model.dims.encoder_layers << ' ' << model.dims.classifier_layers << ' '
     << model.dims.classes << '\n';
  for (const auto& [key, value] : metadata) os << "meta " << key << ' ' << value << '\n';
  for (std::size_t l = 0; l < model.encoder_weights.size(); ++l) {
    write_matrix(os, "encoder." + std::to_string(l), model.encoder_weights[l]);
  }
  for (std::size_t k = 0; k < model.decoder_weights.size(); ++k) {
    write_matrix(os, "decoder.weight." + std::to_string(k), model.decoder_weights[k]);
    write_matrix(os, "decoder.bias." + std::to_string(k), model.decoder_biases[k]);
  }
  os << "end\n";
}

GrafairModel load_checkpoint(const std::string& path, std::map<std::string, std::string>* metadata) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::MissingFile, "checkpoint " + path);
  std::string line;
  int line_no = 0;
  auto next = [&]() {
    if (!std::getline(is, line)) bad_checkpoint(path, line_no, "unexpected end of file");
    ++line_no;
    return std::istringstream(line);
  };

  {
    auto ss = next();
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != "grafair-checkpoint" || version != 1) bad_checkpoint(path, line_no, "bad header");
  }
  GrafairModel model;
  bool have_variant = false;
  bool have_dims = false;
  std::map<std::string, Matrix> tensors;
  while (true) {
    auto ss = next();
    std::string tag;
    ss >> tag;
    if (tag == "end") break;
    if (tag == "variant") {
      std::string v;
      ss >> v;
      model.variant = parse_variant(v);
      have_variant = true;
    } else if (tag == "dims") {
      ss >> model.dims.in_features >> model.dims.hidden_dim >> model.dims.encoder_layers >>
          model.dims.classifier_layers >> model.dims.classes;
      if (!ss) bad_checkpoint(path, line_no, "malformed dims");
      have_dims = true;
    } else if (tag == "meta") {
      std::string key;
      ss >> key;
      std::string value;
      std::getline(ss >> std::ws, value);
      if (metadata) (*metadata)[key] = value;
    } else if (tag == "matrix") {
      std::string name;
      Index rows = 0;
      Index cols = 0;
      ss >> name >> rows >> cols;
      if (!ss || rows < 0 || cols < 0) bad_checkpoint(path, line_no, "malformed matrix header");
      Matrix m(rows, cols);
      for (Index r = 0; r < rows; ++r) {
        auto row = next();
        for (Index c = 0; c < cols; ++c) {
          if (!(row >> m(r, c))) bad_checkpoint(path, line_no, "short matrix row");
        }
      }
      tensors[name] = std::move(m);
    } else {
      bad_checkpoint(path, line_no, "unknown record '" + tag + "'");
    }
  }
  if (!have_variant || !have_dims) bad_checkpoint(path, line_no, "missing variant or dims");
  validate_dims(model.dims);

  auto take = [&](const std::string& name, Index rows, Index cols) {
    auto it = tensors.find(name);
    if (it == tensors.end()) bad_checkpoint(path, line_no, "missing matrix " + name);
    if (it->second.rows() != rows || it->second.cols() != cols) {
      bad_checkpoint(path, line_no, "matrix " + name + " has the wrong shape");
    }
    return it->second;
  };
  // Shapes come from a fresh initialization so the checkpoint is checked against them.
  const GrafairModel shape = init_weights(model.dims, model.variant, 0);
  for (std::size_t l = 0; l < shape.encoder_weights.size(); ++l) {
    const auto& s = shape.encoder_weights[l];
    model.encoder_weights.push_back(take("encoder." + std::to_string(l), s.rows(), s.cols()));
  }
  for (std::size_t k = 0; k < shape.decoder_weights.size(); ++k) {
    const auto& w = shape.decoder_weights[k];
    const auto& b = shape.decoder_biases[k];
    model.decoder_weights.push_back(take("decoder.weight." + std::to_string(k), w.rows(), w.cols()));
    model.decoder_biases.push_back(take("decoder.bias." + std::to_string(k), b.rows(), b.cols()));
  }
  return model;
}

}  // namespace grafair
