#include "blur/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace blur {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'B', 'L', 'U', 'R', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeReal64 = 0;
constexpr uint8_t kDtypeComplexPlanes = 1;  // re plane then im plane

json config_to_json(const ModelConfig& c) {
  json j;
  j["input_dim"] = c.input_dim;
  j["embed_dim"] = c.embed_dim;
  j["latent_dim"] = c.latent_dim;
  j["num_blocks"] = c.num_blocks;
  j["output_dim"] = c.output_dim;
  j["nonlinearity"] = c.nonlinearity == Nonlinearity::glu ? "glu" : "mlp";
  j["mlp_hidden"] = c.mlp_hidden;
  j["norm"] = c.norm == NormKind::batch ? "batch" : "layer";
  j["task"] = c.task == TaskKind::regression ? "regression" : "classification";
  j["dropout"] = c.dropout;
  j["e_min"] = c.e_min;
  j["e_max"] = c.e_max;
  j["phase_max"] = c.phase_max;
  j["bidirectional"] = c.bidirectional;
  j["gamma_learnable"] = c.gamma_learnable;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<int64_t>();
  c.embed_dim = j.at("embed_dim").get<int64_t>();
  c.latent_dim = j.at("latent_dim").get<int64_t>();
  c.num_blocks = j.at("num_blocks").get<int64_t>();
  c.output_dim = j.at("output_dim").get<int64_t>();
  c.nonlinearity = j.at("nonlinearity").get<std::string>() == "glu" ? Nonlinearity::glu : Nonlinearity::mlp;
  c.mlp_hidden = j.at("mlp_hidden").get<int64_t>();
  c.norm = j.at("norm").get<std::string>() == "batch" ? NormKind::batch : NormKind::layer;
  c.task = j.at("task").get<std::string>() == "regression" ? TaskKind::regression : TaskKind::classification;
  c.dropout = j.at("dropout").get<double>();
  c.e_min = j.at("e_min").get<double>();
  c.e_max = j.at("e_max").get<double>();
  c.phase_max = j.at("phase_max").get<double>();
  c.bidirectional = j.at("bidirectional").get<bool>();
  c.gamma_learnable = j.at("gamma_learnable").get<bool>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

// One serializable entry: a real tensor, a complex plane pair, or a raw
// running-statistics vector.
struct Entry {
  std::string name;
  uint8_t dtype = kDtypeReal64;
  Shape shape;
  std::vector<double>* primary = nullptr;
  std::vector<double>* secondary = nullptr;  // im plane for complex entries
};

std::vector<Entry> model_entries(BlurModel& model) {
  std::vector<Entry> out;
  auto real = [&](const std::string& name, Tensor& t) {
    out.push_back({name, kDtypeReal64, t.shape(), &t.value(), nullptr});
  };
  auto cplx = [&](const std::string& name, Tensor& re, Tensor& im) {
    out.push_back({name, kDtypeComplexPlanes, re.shape(), &re.value(), &im.value()});
  };
  auto raw = [&](const std::string& name, std::vector<double>& v) {
    out.push_back({name, kDtypeReal64, Shape{static_cast<int64_t>(v.size())}, &v, nullptr});
  };
  real("enc.w", model.enc_w);
  real("enc.b", model.enc_b);
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    auto& b = model.blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    for (auto* dir : {&b.fwd, &b.bwd}) {
      const std::string dp = p + (dir->direction == LruDirection::forward ? "fwd." : "bwd.");
      real(dp + "nu_log", dir->nu_log);
      real(dp + "theta", dir->theta);
      real(dp + "gamma", dir->gamma);
      cplx(dp + "b", dir->b_re, dir->b_im);
    }
    cplx(p + "merge_f", b.merge_f_re, b.merge_f_im);
    cplx(p + "merge_b", b.merge_b_re, b.merge_b_im);
    cplx(p + "merge_bias", b.merge_bias_re, b.merge_bias_im);
    real(p + "g1_w", b.g1_w);
    real(p + "g1_b", b.g1_b);
    real(p + "g2_w", b.g2_w);
    real(p + "g2_b", b.g2_b);
    real(p + "skip_c", b.skip_c);
    real(p + "norm_gamma", b.norm_gamma);
    real(p + "norm_beta", b.norm_beta);
    raw(p + "run_mean", b.run_mean);
    raw(p + "run_var", b.run_var);
  }
  real("head.w", model.head_w);
  real("head.b", model.head_b);
  return out;
}

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint truncated while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const BlurModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const std::string cfg = config_to_json(model.config).dump();
  write_pod(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  auto entries = model_entries(const_cast<BlurModel&>(model));
  write_pod(out, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    write_pod(out, static_cast<uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod(out, e.dtype);
    write_pod(out, static_cast<uint32_t>(e.shape.size()));
    for (int64_t d : e.shape) write_pod(out, static_cast<uint64_t>(d));
    out.write(reinterpret_cast<const char*>(e.primary->data()),
              static_cast<std::streamsize>(e.primary->size() * sizeof(double)));
    if (e.dtype == kDtypeComplexPlanes)
      out.write(reinterpret_cast<const char*>(e.secondary->data()),
                static_cast<std::streamsize>(e.secondary->size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

namespace {

void load_entries(BlurModel& model, std::ifstream& in) {
  auto entries = model_entries(model);
  const uint32_t count = read_pod<uint32_t>(in, "entry count");
  size_t next_expected = 0;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(in, "entry name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("checkpoint truncated while reading entry name");
    const uint8_t dtype = read_pod<uint8_t>(in, "dtype of " + name);
    const uint32_t rank = read_pod<uint32_t>(in, "rank of " + name);
    Shape shape(rank);
    for (uint32_t r = 0; r < rank; ++r)
      shape[r] = static_cast<int64_t>(read_pod<uint64_t>(in, "dims of " + name));

    if (next_expected >= entries.size())
      throw IoError("checkpoint entry '" + name + "' has no counterpart in the model");
    Entry& e = entries[next_expected++];
    if (e.name != name)
      throw IoError("unknown or out-of-order checkpoint entry '" + name + "' (expected '" +
                    e.name + "')");
    if (e.dtype != dtype) throw IoError("dtype mismatch for entry '" + name + "'");
    if (e.shape != shape)
      throw IoError("shape mismatch for entry '" + name + "': checkpoint has " +
                    shape_str(shape) + ", model expects " + shape_str(e.shape));
    in.read(reinterpret_cast<char*>(e.primary->data()),
            static_cast<std::streamsize>(e.primary->size() * sizeof(double)));
    if (dtype == kDtypeComplexPlanes)
      in.read(reinterpret_cast<char*>(e.secondary->data()),
              static_cast<std::streamsize>(e.secondary->size() * sizeof(double)));
    if (!in) throw IoError("checkpoint truncated while reading values of '" + name + "'");
  }
  if (next_expected != entries.size())
    throw IoError("checkpoint is missing entry '" + entries[next_expected].name + "'");
}

std::pair<std::ifstream, ModelConfig> open_and_read_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a BLUR checkpoint (bad magic): " + path);
  const uint32_t version = read_pod<uint32_t>(in, "version");
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kVersion) + ")");
  const uint32_t cfg_len = read_pod<uint32_t>(in, "config length");
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), cfg_len);
  if (!in) throw IoError("checkpoint truncated while reading config");
  json j;
  try {
    j = json::parse(cfg);
  } catch (const std::exception& ex) {
    throw IoError(std::string("invalid checkpoint config block: ") + ex.what());
  }
  return {std::move(in), config_from_json(j)};
}

}  // namespace

BlurModel load_checkpoint(const std::string& path) {
  auto [in, cfg] = open_and_read_header(path);
  BlurModel model = init_model(cfg);
  load_entries(model, in);
  return model;
}

void load_checkpoint_into(BlurModel& model, const std::string& path) {
  auto [in, cfg] = open_and_read_header(path);
  (void)cfg;  // entry-by-entry validation reports precise mismatches
  load_entries(model, in);
}

}  // namespace blur
