#include "snarf/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "detail/binary_io.hpp"

namespace snarf {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'R', 'F'};
constexpr std::uint32_t kMaxLayers = 1024;
constexpr std::uint32_t kMaxWidth = 1u << 20;

void write_spec(detail::BinaryWriter& w, const MlpSpec& spec) {
  w.u32(static_cast<std::uint32_t>(spec.input_dim));
  w.u32(static_cast<std::uint32_t>(spec.output_dim));
  w.u32(static_cast<std::uint32_t>(spec.hidden_widths.size()));
  for (int width : spec.hidden_widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(spec.hidden_activation));
  w.u32(static_cast<std::uint32_t>(spec.output_activation));
  w.f64(spec.softplus_beta);
}

MlpSpec read_spec(detail::BinaryReader& r) {
  MlpSpec spec;
  const auto checked = [&r](std::uint32_t v, const char* field) {
    if (v == 0 || v > kMaxWidth) r.fail(std::string("invalid ") + field);
    return static_cast<int>(v);
  };
  spec.input_dim = checked(r.u32(), "input_dim");
  spec.output_dim = checked(r.u32(), "output_dim");
  const std::uint32_t hidden = r.u32();
  if (hidden == 0 || hidden > kMaxLayers) r.fail("invalid hidden layer count");
  for (std::uint32_t i = 0; i < hidden; ++i) spec.hidden_widths.push_back(checked(r.u32(), "hidden width"));
  const std::uint32_t hidden_act = r.u32();
  if (hidden_act > 1) r.fail("unknown hidden activation");
  spec.hidden_activation = static_cast<HiddenActivation>(hidden_act);
  const std::uint32_t output_act = r.u32();
  if (output_act > 2) r.fail("unknown output activation");
  spec.output_activation = static_cast<OutputActivation>(output_act);
  spec.softplus_beta = r.f64();
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  return spec;
}

void write_mlp_impl(detail::BinaryWriter& w, const MlpParams& params) {
  write_spec(w, params.spec());
  w.u64(params.size());
  for (double v : params.values()) w.f64(v);
}

MlpParams read_mlp_impl(detail::BinaryReader& r) {
  MlpParams params(read_spec(r));
  const std::uint64_t count = r.u64();
  if (count != params.size()) r.fail("parameter count does not match network spec");
  for (double& v : params.values()) v = r.f64();
  return params;
}

}  // namespace

void write_mlp(std::ostream& out, const MlpParams& params) {
  detail::BinaryWriter w(out);
  write_mlp_impl(w, params);
}

MlpParams read_mlp(std::istream& in) {
  detail::BinaryReader r(in, "network");
  return read_mlp_impl(r);
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  detail::BinaryWriter w(out);
  w.bytes(kMagic, 4);
  w.u32(Checkpoint::kVersion);
  w.u32(static_cast<std::uint32_t>(checkpoint.kind));
  write_mlp_impl(w, checkpoint.occupancy);
  write_mlp_impl(w, checkpoint.skinning);
  w.string(checkpoint.metadata);
}

Checkpoint read_checkpoint(std::istream& in) {
  detail::BinaryReader r(in, "checkpoint");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) r.fail("bad magic (expected SNRF)");
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint checkpoint;
  const std::uint32_t kind = r.u32();
  if (kind > 1) r.fail("unknown model kind " + std::to_string(kind));
  checkpoint.kind = static_cast<ModelKind>(kind);
  checkpoint.occupancy = read_mlp_impl(r);
  checkpoint.skinning = read_mlp_impl(r);
  checkpoint.metadata = r.string();
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, checkpoint);
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace snarf
