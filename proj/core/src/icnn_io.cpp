#include <fstream>

#include <nlohmann/json.hpp>

#include "icnnpd/icnn.hpp"

namespace icnnpd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

class BlobWriter {
 public:
  explicit BlobWriter(fs::path dir) : dir_(std::move(dir)) {}

  std::string put(const std::string& stem, const Tensor& t) {
    const std::string name = stem + ".tnsb";
    write_blob(t, dir_ / name);
    return name;
  }

 private:
  fs::path dir_;
};

json operator_to_json(const LinearOperator& op, const std::string& stem, BlobWriter& out) {
  switch (op.kind()) {
    case OperatorKind::Identity:
      return {{"kind", "identity"}, {"shape", op.input_shape()}};
    case OperatorKind::Dense: {
      const auto& d = static_cast<const DenseOperator&>(op);
      return {{"kind", "dense"},
              {"matrix", out.put(stem, d.matrix())},
              {"input_shape", op.input_shape()}};
    }
    case OperatorKind::Conv2D: {
      const auto& c = static_cast<const Conv2DOperator&>(op);
      return {{"kind", "conv2d"},
              {"filters", out.put(stem, c.filters())},
              {"height", op.input_shape()[1]},
              {"width", op.input_shape()[2]}};
    }
    case OperatorKind::AvgPool2D: {
      const auto& p = static_cast<const AvgPool2DOperator&>(op);
      return {{"kind", "avgpool2d"}, {"pool", p.pool()}, {"input_shape", op.input_shape()}};
    }
    case OperatorKind::DiagonalMask: {
      const auto& m = static_cast<const DiagonalMaskOperator&>(op);
      return {{"kind", "diagonal_mask"}, {"mask", out.put(stem, m.mask())}};
    }
    case OperatorKind::Compose: {
      const auto& c = static_cast<const ComposeOperator&>(op);
      json ops = json::array();
      for (std::size_t i = 0; i < c.ops().size(); ++i) {
        ops.push_back(operator_to_json(*c.ops()[i], stem + "_" + std::to_string(i), out));
      }
      return {{"kind", "compose"}, {"ops", ops}};
    }
    case OperatorKind::Radon:
    case OperatorKind::Block:
      break;
  }
  throw Error(ErrorKind::InvalidArgument,
              std::string("cannot serialize operator kind ") + to_string(op.kind()));
}

json activation_to_json(const Activation& a) {
  json j{{"kind", a.name()}};
  if (a.kind == Activation::Kind::LeakyReLU) j["alpha"] = a.alpha;
  return j;
}

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::Format, "manifest " + where + ": " + what);
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) malformed(where, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    malformed(where, std::string("field '") + key + "': " + e.what());
  }
}

class BlobReader {
 public:
  explicit BlobReader(fs::path dir) : dir_(std::move(dir)) {}

  Tensor get(const json& j, const char* key, const std::string& where) const {
    const auto name = field<std::string>(j, key, where);
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) {
      throw Error(ErrorKind::MissingFile, "manifest " + where + " references missing blob '" +
                                              name + "'");
    }
    return read_blob(p);
  }

 private:
  fs::path dir_;
};

OperatorPtr operator_from_json(const json& j, const std::string& where, const BlobReader& in) {
  const auto kind = field<std::string>(j, "kind", where);
  if (kind == "identity") return make_identity(field<Shape>(j, "shape", where));
  if (kind == "dense") {
    Tensor m = in.get(j, "matrix", where);
    if (m.rank() != 2) throw ShapeError(where + " dense matrix", Shape{0, 0}, m.shape());
    Shape input = j.contains("input_shape") ? field<Shape>(j, "input_shape", where)
                                            : Shape{m.shape()[1]};
    if (shape_size(input) != m.shape()[1]) {
      throw ShapeError(where + " dense input", Shape{m.shape()[1]}, input);
    }
    return make_dense(std::move(m), std::move(input));
  }
  if (kind == "conv2d") {
    Tensor f = in.get(j, "filters", where);
    return make_conv2d(std::move(f), field<std::size_t>(j, "height", where),
                       field<std::size_t>(j, "width", where));
  }
  if (kind == "avgpool2d") {
    return make_avgpool2d(field<Shape>(j, "input_shape", where), field<std::size_t>(j, "pool", where));
  }
  if (kind == "diagonal_mask") return make_mask(in.get(j, "mask", where));
  if (kind == "compose") {
    const auto& ops = j.at("ops");
    if (!ops.is_array() || ops.empty()) malformed(where, "compose needs a non-empty 'ops' array");
    std::vector<OperatorPtr> chain;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      chain.push_back(operator_from_json(ops[i], where + ".ops[" + std::to_string(i) + "]", in));
    }
    return std::make_shared<ComposeOperator>(std::move(chain));
  }
  malformed(where, "unknown operator kind '" + kind + "'");
}

Activation activation_from_json(const json& j, const std::string& where) {
  const auto kind = field<std::string>(j, "kind", where);
  if (kind == "relu") return Activation::relu();
  if (kind == "identity") return Activation::identity();
  if (kind == "leaky_relu") return Activation::leaky_relu(field<double>(j, "alpha", where));
  malformed(where, "unknown activation '" + kind + "'");
}

}  // namespace

void save_weights(const IcnnSpec& spec, const fs::path& dir) {
  fs::create_directories(dir);
  BlobWriter out(dir);
  json layers = json::array();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::string stem = "layer" + std::to_string(i + 1);
    json jl;
    jl["V"] = l.V ? operator_to_json(*l.V, stem + "_V", out) : json(nullptr);
    jl["W"] = l.W ? operator_to_json(*l.W, stem + "_W", out) : json(nullptr);
    jl["b"] = out.put(stem + "_b", l.b);
    jl["activation"] = activation_to_json(l.activation);
    jl["residual"] = l.residual;
    layers.push_back(std::move(jl));
  }
  json manifest{{"format", "icnn-weights"},
                {"version", kManifestVersion},
                {"input_shape", spec.input_shape},
                {"layers", layers}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error(ErrorKind::Io, "cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
}

IcnnSpec load_weights(const fs::path& dir, bool allow_inadmissible) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) {
    throw Error(ErrorKind::MissingFile, "weights manifest not found: " + mpath.string());
  }
  json manifest;
  {
    std::ifstream is(mpath);
    try {
      manifest = json::parse(is);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Format, mpath.string() + ": " + e.what());
    }
  }
  if (field<std::string>(manifest, "format", "root") != "icnn-weights") {
    malformed("root", "format is not 'icnn-weights'");
  }
  if (field<int>(manifest, "version", "root") != kManifestVersion) {
    malformed("root", "unsupported version");
  }

  BlobReader in(dir);
  IcnnSpec spec;
  spec.input_shape = field<Shape>(manifest, "input_shape", "root");
  const auto& layers = manifest.at("layers");
  if (!layers.is_array()) malformed("root", "'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layers[" + std::to_string(i) + "]";
    const auto& jl = layers[i];
    IcnnLayer l;
    if (jl.contains("V") && !jl["V"].is_null()) l.V = operator_from_json(jl["V"], where + ".V", in);
    if (jl.contains("W") && !jl["W"].is_null()) l.W = operator_from_json(jl["W"], where + ".W", in);
    l.b = in.get(jl, "b", where);
    l.activation = activation_from_json(field<json>(jl, "activation", where), where + ".activation");
    l.residual = jl.value("residual", false);
    spec.layers.push_back(std::move(l));
  }

  const auto report = validate(spec);
  if (!report.admissible()) {
    bool structural = false;
    for (const auto& v : report.violations) {
      structural |= v.kind != Violation::Kind::NegativeWeight;
    }
    if (structural || !allow_inadmissible) {
      const auto kind = structural && report.violations.front().kind == Violation::Kind::ShapeBreak
                            ? ErrorKind::ShapeMismatch
                            : ErrorKind::Admissibility;
      throw Error(kind, dir.string() + ": " + report.summary());
    }
  }
  return spec;
}

}  // namespace icnnpd
