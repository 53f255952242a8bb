#include "roiloc/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

namespace roiloc::nn {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'O', 'I', 'L', 'O', 'C', 'N', 'N'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t& at) {
  if (at + sizeof(U) > in.size()) throw Error("truncated checkpoint");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<std::uint8_t>(in[at + i])) << (8 * i);
  }
  at += sizeof(U);
  return value;
}

json spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"kind", std::string(to_string(l.kind))}, {"kernel", l.kernel}, {"in", l.in}, {"out", l.out}});
  }
  return {{"arch_id", spec.arch_id},
          {"head", std::string(to_string(spec.head))},
          {"input_shape", spec.input_shape},
          {"channel_widths", spec.channel_widths},
          {"output_size", spec.output_size},
          {"layers", layers}};
}

NetworkSpec spec_from_json(const json& doc) {
  NetworkSpec spec;
  spec.arch_id = doc.at("arch_id").get<int>();
  spec.head = head_from_string(doc.at("head").get<std::string>());
  spec.input_shape = doc.at("input_shape").get<Index3>();
  spec.channel_widths = doc.at("channel_widths").get<std::array<int, 3>>();
  spec.output_size = doc.at("output_size").get<int>();
  for (const auto& l : doc.at("layers")) {
    spec.layers.push_back({layer_kind_from_string(l.at("kind").get<std::string>()), l.at("kernel").get<int>(),
                           l.at("in").get<int>(), l.at("out").get<int>()});
  }
  return spec;
}

void put_floats(std::string& out, const std::vector<float>& values) {
  for (float v : values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
}

void get_floats(const std::string& in, std::size_t& at, std::vector<float>& values) {
  for (float& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(in, at));
}

}  // namespace

std::string serialize_checkpoint(const Network<float>& network) {
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = spec_to_json(network.spec()).dump();
  put_le<std::uint64_t>(out, header.size());
  out += header;
  for (const auto& layer : network.params().layers) {
    put_floats(out, layer.weight);
    put_floats(out, layer.bias);
    put_floats(out, layer.running_mean);
    put_floats(out, layer.running_var);
  }
  return out;
}

Network<float> deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error("not a network checkpoint");
  }
  std::size_t at = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(bytes, at);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, at);
  if (at + header_len > bytes.size()) throw Error("truncated checkpoint header");
  NetworkSpec spec;
  try {
    spec = spec_from_json(json::parse(bytes.substr(at, header_len)));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }
  at += header_len;

  // Shapes come from a freshly built network of the same spec.
  Params<float> params = Network<float>::build(spec, 0).params();
  for (auto& layer : params.layers) {
    get_floats(bytes, at, layer.weight);
    get_floats(bytes, at, layer.bias);
    get_floats(bytes, at, layer.running_mean);
    get_floats(bytes, at, layer.running_var);
  }
  if (at != bytes.size()) throw Error("trailing bytes in checkpoint");
  return Network<float>(std::move(spec), std::move(params));
}

void save_checkpoint(const Network<float>& network, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string bytes = serialize_checkpoint(network);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace roiloc::nn
