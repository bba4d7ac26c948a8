#include "rainbowq/snapshot.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rainbowq/digest.h"
#include "rainbowq/errors.h"

namespace rainbowq {

namespace {

namespace fs = std::filesystem;

void write_u32(std::ostream& out, uint32_t x, Digest& dig) {
  char buf[4];
  std::memcpy(buf, &x, 4);
  out.write(buf, 4);
  dig.update(buf, 4);
}

uint32_t read_u32(std::istream& in, Digest& dig, const std::string& path) {
  char buf[4];
  if (!in.read(buf, 4)) throw IoError("truncated tensor file: " + path);
  dig.update(buf, 4);
  uint32_t x;
  std::memcpy(&x, buf, 4);
  return x;
}

void write_tensor_file(const std::string& path, const std::string& name, const Tensor& t,
                       Digest& dig) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tensor file: " + path);
  write_u32(out, static_cast<uint32_t>(name.size()), dig);
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  dig.update(name);
  char tags[2] = {0 /* f32 */, static_cast<char>(t.rank())};
  out.write(tags, 2);
  dig.update(tags, 2);
  for (int i = 0; i < t.rank(); ++i) write_u32(out, static_cast<uint32_t>(t.dim(i)), dig);
  const auto bytes = static_cast<std::streamsize>(t.size() * sizeof(float));
  out.write(reinterpret_cast<const char*>(t.data()), bytes);
  dig.update(t.data(), static_cast<size_t>(bytes));
  if (!out) throw IoError("failed writing tensor file: " + path);
}

Tensor read_tensor_file(const std::string& path, const std::string& expect_name, Digest& dig) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read tensor file: " + path);
  const uint32_t name_len = read_u32(in, dig, path);
  if (name_len > 4096) throw IoError("implausible name length in " + path);
  std::string name(name_len, '\0');
  if (!in.read(name.data(), name_len)) throw IoError("truncated tensor file: " + path);
  dig.update(name);
  if (name != expect_name)
    throw IoError("tensor file " + path + " holds '" + name + "', manifest says '" +
                  expect_name + "'");
  char tags[2];
  if (!in.read(tags, 2)) throw IoError("truncated tensor file: " + path);
  dig.update(tags, 2);
  if (tags[0] != 0) throw IoError("unknown dtype tag in " + path);
  const int rank = tags[1];
  if (rank < 0 || rank > 4) throw IoError("implausible rank in " + path);
  std::vector<int> shape(static_cast<size_t>(rank));
  for (int i = 0; i < rank; ++i)
    shape[static_cast<size_t>(i)] = static_cast<int>(read_u32(in, dig, path));
  Tensor t(shape);
  const auto bytes = static_cast<std::streamsize>(t.size() * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(t.data()), bytes))
    throw IoError("truncated tensor file: " + path);
  dig.update(t.data(), static_cast<size_t>(bytes));
  return t;
}

// Roster of every tensor a snapshot carries, in a fixed order.
std::vector<std::pair<std::string, const Tensor*>> roster(QNetwork& net) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  auto& online = net.params();
  for (size_t i = 0; i < online.count(); ++i)
    out.emplace_back("online." + online.name_at(i), &online.value_at(i));
  auto& target = net.target_params();
  for (size_t i = 0; i < target.count(); ++i)
    out.emplace_back("target." + target.name_at(i), &target.value_at(i));
  for (size_t i = 0; i < net.sn_conv_names().size(); ++i) {
    out.emplace_back("snu." + std::to_string(i), &net.sn_u(i));
    out.emplace_back("snu_t." + std::to_string(i), &net.sn_u_target(i));
  }
  return out;
}

std::string meta_lines(const RunConfig& cfg, const SnapshotMeta& m,
                       const std::vector<std::string>& tensor_names) {
  std::ostringstream out;
  out << "format = rainbowq-snapshot-1\n";
  out << serialize_config(cfg);
  out << "# counters\n";
  out << "frames = " << m.state.frames << "\n";
  out << "transitions = " << m.state.transitions << "\n";
  out << "vector_steps = " << m.state.vector_steps << "\n";
  out << "warmup_vector_steps = " << m.state.warmup_vector_steps << "\n";
  out << "train_steps = " << m.state.train_steps << "\n";
  out << "samples = " << m.state.samples << "\n";
  out << "episodes = " << m.state.episodes << "\n";
  out << "last_sync_frame = " << m.last_sync_frame << "\n";
  out << "adam_steps = " << m.adam_steps << "\n";
  out << "rng_actor = " << m.rng_actor << "\n";
  out << "rng_agent = " << m.rng_agent << "\n";
  out << "# network geometry\n";
  out << "net_in_channels = " << m.net_in_channels << "\n";
  out << "net_in_h = " << m.net_in_h << "\n";
  out << "net_in_w = " << m.net_in_w << "\n";
  out << "net_actions = " << m.net_actions << "\n";
  out << "# tensors\n";
  out << "tensor_count = " << tensor_names.size() << "\n";
  for (size_t i = 0; i < tensor_names.size(); ++i)
    out << "tensor." << i << " = " << tensor_names[i] << "\n";
  return out.str();
}

}  // namespace

void save_snapshot(const std::string& dir, const RunConfig& cfg, QNetwork& net,
                   const SnapshotMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create snapshot directory " + dir + ": " + ec.message());

  Digest dig;
  std::vector<std::string> names;
  for (const auto& [name, tensor] : roster(net)) {
    names.push_back(name);
    write_tensor_file(dir + "/" + name + ".bin", name, *tensor, dig);
  }

  const std::string body = meta_lines(cfg, meta, names);
  dig.update(body);
  const std::string manifest_path = dir + "/manifest.txt";
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write manifest: " + manifest_path);
  out << body;
  out << "digest = " << dig.hex() << "\n";
  if (!out) throw IoError("failed writing manifest: " + manifest_path);
}

SnapshotData load_snapshot(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.txt";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read manifest: " + manifest_path);

  std::map<std::string, std::string> kv;
  std::vector<std::string> tensor_names;
  std::string body;  // everything before the digest line, byte-exact
  std::string line;
  std::string digest_hex;
  while (std::getline(in, line)) {
    std::string stripped = line;
    const size_t hash = stripped.find('#');
    if (hash != std::string::npos) stripped.erase(hash);
    const size_t eq = stripped.find('=');
    std::string key, value;
    if (eq != std::string::npos) {
      key = stripped.substr(0, eq);
      value = stripped.substr(eq + 1);
      while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
      size_t a = 0;
      while (a < key.size() && std::isspace(static_cast<unsigned char>(key[a]))) ++a;
      key.erase(0, a);
      a = 0;
      while (a < value.size() && std::isspace(static_cast<unsigned char>(value[a]))) ++a;
      value.erase(0, a);
      while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back())))
        value.pop_back();
    }
    if (key == "digest") {
      digest_hex = value;
      break;
    }
    body += line + "\n";
    if (key.empty()) continue;
    if (key.rfind("tensor.", 0) == 0)
      tensor_names.push_back(value);
    else
      kv[key] = value;
  }
  if (digest_hex.empty()) throw IoError("manifest missing digest: " + manifest_path);

  auto want = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError("manifest missing key '" + key + "': " + manifest_path);
    return it->second;
  };

  SnapshotData data;
  for (const std::string& key : config_keys()) set_key(data.cfg, key, want(key));
  validate(data.cfg);

  auto geti = [&](const std::string& key) { return std::stoll(want(key)); };
  data.meta.state.frames = geti("frames");
  data.meta.state.transitions = geti("transitions");
  data.meta.state.vector_steps = geti("vector_steps");
  data.meta.state.warmup_vector_steps = geti("warmup_vector_steps");
  data.meta.state.train_steps = geti("train_steps");
  data.meta.state.samples = geti("samples");
  data.meta.state.episodes = geti("episodes");
  data.meta.state.set_transitions_per_step(data.cfg.num_envs);
  data.meta.last_sync_frame = geti("last_sync_frame");
  data.meta.adam_steps = geti("adam_steps");
  data.meta.rng_actor = want("rng_actor");
  data.meta.rng_agent = want("rng_agent");
  data.meta.net_in_channels = static_cast<int>(geti("net_in_channels"));
  data.meta.net_in_h = static_cast<int>(geti("net_in_h"));
  data.meta.net_in_w = static_cast<int>(geti("net_in_w"));
  data.meta.net_actions = static_cast<int>(geti("net_actions"));
  if (static_cast<size_t>(std::stoll(want("tensor_count"))) != tensor_names.size())
    throw IoError("manifest tensor count mismatch: " + manifest_path);

  Digest dig;
  for (const std::string& name : tensor_names)
    data.tensors.emplace_back(name, read_tensor_file(dir + "/" + name + ".bin", name, dig));
  dig.update(body);
  if (dig.hex() != digest_hex)
    throw IoError("snapshot digest mismatch in " + dir + ": manifest says " + digest_hex +
                  ", contents hash to " + dig.hex());
  data.digest = dig.value();
  return data;
}

void apply_snapshot(const SnapshotData& data, QNetwork& net) {
  size_t applied = 0;
  auto put = [&](ParamStoreT<float>& store, const std::string& name, const Tensor& t) {
    if (!store.has(name)) throw IoError("snapshot tensor has no home: " + name);
    Tensor& dst = store.value(name);
    if (!dst.same_shape(t))
      throw IoError("snapshot tensor shape mismatch at " + name + ": stored " + t.shape_str() +
                    ", network has " + dst.shape_str());
    dst.v = t.v;
    ++applied;
  };
  for (const auto& [name, tensor] : data.tensors) {
    if (name.rfind("online.", 0) == 0) {
      put(net.params(), name.substr(7), tensor);
    } else if (name.rfind("target.", 0) == 0) {
      put(net.target_params(), name.substr(7), tensor);
    } else if (name.rfind("snu_t.", 0) == 0) {
      const size_t i = static_cast<size_t>(std::stoll(name.substr(6)));
      if (i >= net.sn_conv_names().size()) throw IoError("snapshot has extra sn state: " + name);
      net.sn_u_target(i).v = tensor.v;
      ++applied;
    } else if (name.rfind("snu.", 0) == 0) {
      const size_t i = static_cast<size_t>(std::stoll(name.substr(4)));
      if (i >= net.sn_conv_names().size()) throw IoError("snapshot has extra sn state: " + name);
      net.sn_u(i).v = tensor.v;
      ++applied;
    } else {
      throw IoError("unknown snapshot tensor prefix: " + name);
    }
  }
  const size_t expected =
      net.params().count() + net.target_params().count() + 2 * net.sn_conv_names().size();
  if (applied != expected)
    throw IoError("snapshot is missing tensors: applied " + std::to_string(applied) + " of " +
                  std::to_string(expected));
}

std::unique_ptr<QNetwork> restore_network(const SnapshotData& data) {
  const std::vector<int> obs_shape = {data.meta.net_in_channels, data.meta.net_in_h,
                                      data.meta.net_in_w};
  auto net = std::make_unique<QNetwork>(
      net_config_of(data.cfg, obs_shape, data.meta.net_actions));
  apply_snapshot(data, *net);
  return net;
}

}  // namespace rainbowq
