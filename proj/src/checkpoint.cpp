#include "semsec/binio.hpp"
#include "semsec/nn.hpp"

namespace semsec::nn {

namespace {
constexpr std::string_view kMagic = "SEMSEC01";
}

void save_network(std::ostream& out, const Network& net) {
  using binio::write_le;
  binio::write_tag(out, kMagic);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.in));
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.out));
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.vocab));
  }
  binio::write_vector(out, net.params());
  if (!out) throw StateError("failed writing network checkpoint");
}

Network load_network(std::istream& in) {
  using binio::read_le;
  binio::expect_tag(in, kMagic);
  const auto count = read_le<std::uint32_t>(in);
  std::vector<LayerSpec> spec;
  spec.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind = read_le<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(LayerKind::embedding)) throw StateError("unknown layer kind in checkpoint");
    LayerSpec l;
    l.kind = static_cast<LayerKind>(kind);
    l.in = static_cast<Index>(read_le<std::uint64_t>(in));
    l.out = static_cast<Index>(read_le<std::uint64_t>(in));
    l.vocab = static_cast<Index>(read_le<std::uint64_t>(in));
    spec.push_back(l);
  }
  Network net(std::move(spec));
  Vector params = binio::read_vector(in);
  if (params.size() != net.param_count()) throw StateError("checkpoint parameter count does not match layers");
  net.params() = std::move(params);
  return net;
}

}  // namespace semsec::nn
