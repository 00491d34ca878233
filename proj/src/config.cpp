#include "advseg/config.hpp"

#include <fstream>
#include <sstream>

#include "advseg/errors.hpp"

namespace advseg {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean '" + v + "' for " + key);
}

double parse_real(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number '" + v + "' for " + key);
  }
}

long parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer '" + v + "' for " + key);
  }
}

void apply(TrainConfig& c, const std::string& section, const std::string& key,
           const std::string& value) {
  const std::string full = section.empty() ? key : section + "." + key;
  if (section.empty()) {
    if (key == "seed")
      c.seed = static_cast<std::uint64_t>(parse_int(value, full));
    else if (key == "epochs")
      c.epochs = static_cast<int>(parse_int(value, full));
    else if (key == "batch_size")
      c.batch_size = static_cast<int>(parse_int(value, full));
    else if (key == "patch")
      c.patch = static_cast<int>(parse_int(value, full));
    else if (key == "adversarial")
      c.adversarial = parse_bool(value, full);
    else if (key == "adv_mode") {
      if (value == "saturating")
        c.adv_mode = AdvMode::saturating;
      else if (value == "nonsaturating")
        c.adv_mode = AdvMode::nonsaturating;
      else
        throw ConfigError("config: bad adv_mode '" + value + "'");
    } else if (key == "adv_weight")
      c.adv_weight = parse_real(value, full);
    else
      throw ConfigError("config: unknown key '" + key + "'");
  } else if (section == "generator") {
    if (key == "lr")
      c.g_lr = parse_real(value, full);
    else if (key == "beta1")
      c.g_beta1 = parse_real(value, full);
    else if (key == "beta2")
      c.g_beta2 = parse_real(value, full);
    else if (key == "depth")
      c.depth = static_cast<int>(parse_int(value, full));
    else if (key == "base_width")
      c.base_width = static_cast<int>(parse_int(value, full));
    else if (key == "skip_connections")
      c.skip_connections = parse_bool(value, full);
    else
      throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "discriminator") {
    if (key == "lr")
      c.d_lr = parse_real(value, full);
    else if (key == "beta1")
      c.d_beta1 = parse_real(value, full);
    else if (key == "beta2")
      c.d_beta2 = parse_real(value, full);
    else if (key == "ratio")
      c.d_to_g_ratio = static_cast<int>(parse_int(value, full));
    else if (key == "input") {
      if (value == "mask")
        c.disc_input = DiscInput::mask;
      else if (value == "mask_rgb")
        c.disc_input = DiscInput::mask_rgb;
      else
        throw ConfigError("config: bad discriminator input '" + value + "'");
    } else
      throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "data") {
    if (key == "source") {
      if (value == "directory")
        c.data_source = DataSource::directory;
      else if (value == "synth")
        c.data_source = DataSource::synth;
      else
        throw ConfigError("config: bad data source '" + value + "'");
    } else if (key == "dir")
      c.data_dir = value;
    else if (key == "val_dir")
      c.val_dir = value;
    else if (key == "count")
      c.synth.count = static_cast<int>(parse_int(value, full));
    else if (key == "size")
      c.synth.size = static_cast<int>(parse_int(value, full));
    else if (key == "min_buildings")
      c.synth.min_buildings = static_cast<int>(parse_int(value, full));
    else if (key == "max_buildings")
      c.synth.max_buildings = static_cast<int>(parse_int(value, full));
    else if (key == "min_building_size")
      c.synth.min_building_size = static_cast<int>(parse_int(value, full));
    else if (key == "max_building_size")
      c.synth.max_building_size = static_cast<int>(parse_int(value, full));
    else if (key == "noise")
      c.synth.noise = static_cast<int>(parse_int(value, full));
    else if (key == "background_level")
      c.synth.background_level = static_cast<int>(parse_int(value, full));
    else if (key == "building_level")
      c.synth.building_level = static_cast<int>(parse_int(value, full));
    else if (key == "synth_seed")
      c.synth.seed = static_cast<std::uint64_t>(parse_int(value, full));
    else
      throw ConfigError("config: unknown key '" + full + "'");
  } else {
    throw ConfigError("config: unknown section '" + section + "'");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (d_to_g_ratio < 1) throw ConfigError("config: discriminator.ratio must be >= 1");
  if (g_lr <= 0 || d_lr <= 0) throw ConfigError("config: learning rates must be > 0");
  if (adv_weight < 0) throw ConfigError("config: adv_weight must be >= 0");
  if (depth < 0) throw ConfigError("config: generator.depth must be >= 0");
  if (base_width < 1) throw ConfigError("config: generator.base_width must be >= 1");
  if (patch < 1) throw ConfigError("config: patch must be >= 1");
  if (patch % (1 << depth) != 0)
    throw ConfigError("config: patch " + std::to_string(patch) +
                      " must be divisible by 2^depth = " +
                      std::to_string(1 << depth));
  if (adversarial && patch % 16 != 0)
    throw ConfigError("config: adversarial training needs patch divisible by 16, got " +
                      std::to_string(patch));
  for (double b : {g_beta1, g_beta2, d_beta1, d_beta2})
    if (b < 0.0 || b >= 1.0)
      throw ConfigError("config: betas must lie in [0, 1)");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n";
  os << "epochs = " << epochs << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "patch = " << patch << "\n";
  os << "adversarial = " << (adversarial ? "on" : "off") << "\n";
  os << "adv_mode = "
     << (adv_mode == AdvMode::saturating ? "saturating" : "nonsaturating")
     << "\n";
  os << "adv_weight = " << adv_weight << "\n";
  os << "\n[generator]\n";
  os << "lr = " << g_lr << "\n";
  os << "beta1 = " << g_beta1 << "\n";
  os << "beta2 = " << g_beta2 << "\n";
  os << "depth = " << depth << "\n";
  os << "base_width = " << base_width << "\n";
  os << "skip_connections = " << (skip_connections ? "on" : "off") << "\n";
  os << "\n[discriminator]\n";
  os << "lr = " << d_lr << "\n";
  os << "beta1 = " << d_beta1 << "\n";
  os << "beta2 = " << d_beta2 << "\n";
  os << "ratio = " << d_to_g_ratio << "\n";
  os << "input = " << (disc_input == DiscInput::mask ? "mask" : "mask_rgb")
     << "\n";
  os << "\n[data]\n";
  os << "source = "
     << (data_source == DataSource::directory ? "directory" : "synth") << "\n";
  if (!data_dir.empty()) os << "dir = " << data_dir << "\n";
  if (!val_dir.empty()) os << "val_dir = " << val_dir << "\n";
  os << "count = " << synth.count << "\n";
  os << "size = " << synth.size << "\n";
  os << "min_buildings = " << synth.min_buildings << "\n";
  os << "max_buildings = " << synth.max_buildings << "\n";
  os << "min_building_size = " << synth.min_building_size << "\n";
  os << "max_building_size = " << synth.max_building_size << "\n";
  os << "noise = " << synth.noise << "\n";
  os << "background_level = " << synth.background_level << "\n";
  os << "building_level = " << synth.building_level << "\n";
  os << "synth_seed = " << synth.seed << "\n";
  return os.str();
}

TrainConfig TrainConfig::from_string(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section at line " +
                          std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " +
                        std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value at line " +
                        std::to_string(lineno));
    apply(c, section, key, value);
  }
  return c;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

}  // namespace advseg
