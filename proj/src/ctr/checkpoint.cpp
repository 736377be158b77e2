#include "recrefine/ctr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "recrefine/error.hpp"

namespace recrefine::ctr {

namespace {

constexpr const char* kFormat = "recrefine-ctr-v1";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const Layout layout = make_layout(ckpt.params.shape);
  if (layout.total != ckpt.params.values.size()) {
    throw ModelError("parameter vector does not match shape");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const json header = {{"format", kFormat},
                       {"shape", to_json(ckpt.params.shape)},
                       {"features", ckpt.features.to_json()},
                       {"info", ckpt.info},
                       {"n_params", ckpt.params.values.size()}};
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(ckpt.params.values.data()),
            static_cast<std::streamsize>(ckpt.params.values.size() * sizeof(double)));
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError("bad checkpoint header in " + path.string() + ": " + e.what());
  }
  if (header.value("format", "") != kFormat) {
    throw ValidationError("unsupported checkpoint format in " + path.string());
  }
  Checkpoint ck;
  ck.params.shape = shape_from_json(header.at("shape"));
  ck.features = FeatureSpace::from_json(header.at("features"));
  ck.info = header.value("info", json::object());
  const auto n = header.at("n_params").get<std::size_t>();
  if (make_layout(ck.params.shape).total != n) {
    throw ValidationError("checkpoint parameter count does not match its shape");
  }
  ck.params.values.resize(n);
  in.read(reinterpret_cast<char*>(ck.params.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
    throw ValidationError("checkpoint " + path.string() + " is truncated");
  }
  return ck;
}

}  // namespace recrefine::ctr
