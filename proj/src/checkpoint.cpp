#include "advseg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "advseg/errors.hpp"
#include "advseg/rng.hpp"

namespace advseg {

namespace fs = std::filesystem;

namespace {

// rng stream ids per consumer; shuffle (2) and synthesis (3) live elsewhere
constexpr std::uint64_t kGenInitStream = 0;
constexpr std::uint64_t kDiscInitStream = 1;

void write_f64_le(std::ostream& out, const std::vector<double>& values) {
  for (double d : values) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    char bytes[8];
    for (int i = 0; i < 8; ++i)
      bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
  }
}

void read_f64_le(std::istream& in, std::vector<double>& values,
                 const std::string& what) {
  for (double& d : values) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw IoError("checkpoint: truncated " + what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    d = std::bit_cast<double>(bits);
  }
}

NamedParams full_inventory(const Checkpoint& ckpt) {
  NamedParams inventory;
  for (const auto& [name, t] : ckpt.generator.named_parameters())
    inventory.emplace_back("g." + name, t);
  if (ckpt.discriminator)
    for (const auto& [name, t] : ckpt.discriminator->named_parameters())
      inventory.emplace_back("d." + name, t);
  return inventory;
}

}  // namespace

Generator generator_from_config(const TrainConfig& cfg) {
  GeneratorConfig gc;
  gc.in_channels = 3;
  gc.depth = cfg.depth;
  gc.base_width = cfg.base_width;
  gc.skip_connections = cfg.skip_connections;
  return build_generator(cfg.patch, cfg.patch, gc,
                         mix_seed(cfg.seed + kGenInitStream));
}

std::optional<Discriminator> discriminator_from_config(const TrainConfig& cfg) {
  if (!cfg.adversarial) return std::nullopt;
  const int channels = cfg.disc_input == DiscInput::mask ? 1 : 4;
  return build_discriminator(cfg.patch, cfg.patch, channels,
                             mix_seed(cfg.seed + kDiscInitStream));
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.cfg");
    if (!cfg) throw IoError("checkpoint: cannot write " + (dir / "config.cfg").string());
    cfg << ckpt.config.to_text();
  }

  const NamedParams inventory = full_inventory(ckpt);
  {
    std::ofstream man(dir / "manifest.txt");
    if (!man) throw IoError("checkpoint: cannot write " + (dir / "manifest.txt").string());
    man << "format_version = " << ckpt.format_version << "\n";
    man << "epoch = " << ckpt.epoch << "\n";
    man << "g_adam_t = " << ckpt.g_optim.t << "\n";
    if (ckpt.d_optim) man << "d_adam_t = " << ckpt.d_optim->t << "\n";
    std::uint64_t offset = 0;
    for (const auto& [name, t] : inventory) {
      const std::uint64_t bytes = static_cast<std::uint64_t>(t.numel()) * 8;
      man << "param " << name << " " << t.shape().size();
      for (int e : t.shape()) man << " " << e;
      man << " offset " << offset << " bytes " << bytes << "\n";
      offset += bytes;
    }
  }
  {
    std::ofstream bin(dir / "params.bin", std::ios::binary);
    if (!bin) throw IoError("checkpoint: cannot write " + (dir / "params.bin").string());
    for (const auto& [name, t] : inventory) write_f64_le(bin, t.values());
  }
  {
    std::ofstream bin(dir / "optim.bin", std::ios::binary);
    if (!bin) throw IoError("checkpoint: cannot write " + (dir / "optim.bin").string());
    auto dump_state = [&bin](const AdamState& state) {
      for (std::size_t i = 0; i < state.m.size(); ++i) {
        write_f64_le(bin, state.m[i]);
        write_f64_le(bin, state.v[i]);
      }
    };
    dump_state(ckpt.g_optim);
    if (ckpt.d_optim) dump_state(*ckpt.d_optim);
  }
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IoError("checkpoint: not a directory: " + dir.string());

  Checkpoint ckpt;
  ckpt.config = TrainConfig::from_file(dir / "config.cfg");
  ckpt.config.validate();
  ckpt.generator = generator_from_config(ckpt.config);
  ckpt.discriminator = discriminator_from_config(ckpt.config);

  std::map<std::string, Tensor> by_name;
  for (const auto& [name, t] : full_inventory(ckpt)) by_name.emplace(name, t);

  std::ifstream man(dir / "manifest.txt");
  if (!man) throw IoError("checkpoint: missing manifest at " + dir.string());
  std::string line;
  long g_t = -1, d_t = -1;
  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset, bytes;
  };
  std::vector<Entry> entries;
  int version = -1, epoch = -1;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string head;
    is >> head;
    if (head == "param") {
      Entry e;
      std::size_t rank = 0;
      std::string kw1, kw2;
      if (!(is >> e.name >> rank)) throw IoError("checkpoint: malformed manifest line: " + line);
      e.shape.resize(rank);
      for (std::size_t i = 0; i < rank; ++i)
        if (!(is >> e.shape[i])) throw IoError("checkpoint: malformed manifest line: " + line);
      if (!(is >> kw1 >> e.offset >> kw2 >> e.bytes) || kw1 != "offset" ||
          kw2 != "bytes")
        throw IoError("checkpoint: malformed manifest line: " + line);
      entries.push_back(std::move(e));
    } else {
      std::string eq;
      long value = 0;
      if (!(is >> eq >> value) || eq != "=")
        throw IoError("checkpoint: malformed manifest line: " + line);
      if (head == "format_version")
        version = static_cast<int>(value);
      else if (head == "epoch")
        epoch = static_cast<int>(value);
      else if (head == "g_adam_t")
        g_t = value;
      else if (head == "d_adam_t")
        d_t = value;
      else
        throw IoError("checkpoint: unknown manifest field '" + head + "'");
    }
  }
  if (version != 1)
    throw IoError("checkpoint: unsupported format_version " +
                  std::to_string(version));
  if (epoch < 0) throw IoError("checkpoint: manifest missing epoch");
  if (g_t < 0) throw IoError("checkpoint: manifest missing g_adam_t");
  if (ckpt.discriminator && d_t < 0)
    throw IoError("checkpoint: manifest missing d_adam_t");
  ckpt.format_version = version;
  ckpt.epoch = epoch;

  if (entries.size() != by_name.size())
    throw IoError("checkpoint: manifest lists " + std::to_string(entries.size()) +
                  " parameters, model has " + std::to_string(by_name.size()));

  std::uint64_t expected_offset = 0;
  for (const Entry& e : entries) {
    auto it = by_name.find(e.name);
    if (it == by_name.end())
      throw IoError("checkpoint: manifest names unknown parameter '" + e.name + "'");
    if (it->second.shape() != e.shape)
      throw IoError("checkpoint: parameter '" + e.name + "' has shape " +
                    shape_str(e.shape) + " in manifest but " +
                    shape_str(it->second.shape()) + " in model");
    if (e.offset != expected_offset ||
        e.bytes != static_cast<std::uint64_t>(it->second.numel()) * 8)
      throw IoError("checkpoint: bad offset/length for parameter '" + e.name + "'");
    expected_offset += e.bytes;
  }

  std::ifstream params(dir / "params.bin", std::ios::binary);
  if (!params) throw IoError("checkpoint: missing params.bin at " + dir.string());
  params.seekg(0, std::ios::end);
  if (static_cast<std::uint64_t>(params.tellg()) != expected_offset)
    throw IoError("checkpoint: params.bin is " +
                  std::to_string(params.tellg()) + " bytes, manifest expects " +
                  std::to_string(expected_offset));
  params.seekg(0);
  for (const Entry& e : entries)
    read_f64_le(params, by_name.at(e.name).values(), "params.bin");

  ckpt.g_optim = AdamState::init(ckpt.generator.parameters(), ckpt.config.g_lr,
                                 ckpt.config.g_beta1, ckpt.config.g_beta2);
  ckpt.g_optim.t = g_t;
  if (ckpt.discriminator) {
    ckpt.d_optim = AdamState::init(ckpt.discriminator->parameters(),
                                   ckpt.config.d_lr, ckpt.config.d_beta1,
                                   ckpt.config.d_beta2);
    ckpt.d_optim->t = d_t;
  }
  std::ifstream optim(dir / "optim.bin", std::ios::binary);
  if (!optim) throw IoError("checkpoint: missing optim.bin at " + dir.string());
  auto slurp_state = [&optim](AdamState& state) {
    for (std::size_t i = 0; i < state.m.size(); ++i) {
      read_f64_le(optim, state.m[i], "optim.bin");
      read_f64_le(optim, state.v[i], "optim.bin");
    }
  };
  slurp_state(ckpt.g_optim);
  if (ckpt.d_optim) slurp_state(*ckpt.d_optim);
  return ckpt;
}

}  // namespace advseg
