#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "seg6/behaviors.hpp"
#include "seg6/commands.hpp"
#include "seg6/node.hpp"
#include "seg6/scenario.hpp"
#include "seg6/usecases.hpp"

namespace py = pybind11;
using namespace seg6;

namespace {

Ipv6Address addr(const std::string& s) { return Ipv6Address::parse(s); }

std::vector<Ipv6Address> addrs(const std::vector<std::string>& v) {
  std::vector<Ipv6Address> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(addr(s));
  return out;
}

std::vector<std::string> strs(const std::vector<Ipv6Address>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& a : v) out.push_back(a.to_string());
  return out;
}

py::bytes to_py(const Bytes& b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

py::dict report_dict(const cli::Report& r) {
  py::dict d;
  d["experiment"] = r.experiment;
  d["scenario"] = r.scenario;
  d["config_hash"] = r.config_hash;
  d["exit_code"] = r.exit_code;
  py::dict params;
  for (const auto& [k, v] : r.parameters) params[py::str(k)] = v;
  d["parameters"] = params;
  py::dict metrics;
  for (const auto& m : r.metrics) metrics[py::str(m.name)] = m.value;
  d["metrics"] = metrics;
  d["columns"] = r.table_header;
  d["rows"] = r.table;
  d["trace_path"] = r.trace_path;
  std::ostringstream text;
  cli::write_report(text, r, cli::Format::kText);
  d["text"] = text.str();
  return d;
}

cli::RunOptions run_options(std::optional<uint64_t> seed, std::optional<double> duration_ms,
                            std::optional<uint64_t> packet_count, const std::string& out_dir) {
  cli::RunOptions o;
  o.overrides.seed = seed;
  o.overrides.duration_ms = duration_ms;
  o.overrides.packet_count = packet_count;
  o.out_dir = out_dir;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SRv6 programmable dataplane and simulator";

  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  static py::exception<scenario::ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      parse_error(e.what());
    } catch (const scenario::ConfigError& e) {
      config_error(e.what());
    } catch (const InvariantViolation& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<Srh>(m, "Srh")
      .def_static(
          "from_path",
          [](const std::vector<std::string>& path, const py::bytes& tlvs) {
            return Srh::from_path(addrs(path), from_py(tlvs));
          },
          py::arg("path"), py::arg("tlvs") = py::bytes(),
          "SRH for a path in travel order; TLV bytes must keep 8-octet alignment.")
      .def_property_readonly("segments", [](const Srh& s) { return strs(s.segments); },
                             "Segments in wire order (index 0 is the final segment).")
      .def_readwrite("segments_left", &Srh::segments_left)
      .def_readonly("next_header", &Srh::next_header)
      .def_readonly("last_entry", &Srh::last_entry)
      .def_readonly("hdr_ext_len", &Srh::hdr_ext_len)
      .def_readwrite("flags", &Srh::flags)
      .def_readwrite("tag", &Srh::tag)
      .def_property_readonly("tlv_bytes", [](const Srh& s) { return to_py(s.tlv_bytes); })
      .def_property_readonly("active_segment", [](const Srh& s) { return s.active_segment().to_string(); })
      .def_property_readonly("final_segment", [](const Srh& s) { return s.final_segment().to_string(); })
      .def_property_readonly("encoded_size", &Srh::encoded_size)
      .def(
          "tlvs",
          [](const Srh& s) {
            std::vector<std::pair<int, py::bytes>> out;
            if (auto t = parse_tlv_region(s.tlv_bytes))
              for (const auto& x : *t) out.emplace_back(x.type, to_py(x.value));
            return out;
          },
          "(type, value) pairs of the TLV area.")
      .def(
          "validate",
          [](const Srh& s) -> std::optional<std::string> {
            const auto v = validate_srh(s);
            if (!v) return std::nullopt;
            return std::string(to_string(v->code)) + ": " + v->detail;
          },
          "None when valid, otherwise the first violation.")
      .def("__eq__", [](const Srh& a, const Srh& b) { return a == b; });

  py::class_<Packet>(m, "Packet")
      .def_static(
          "udp",
          [](const std::string& src, const std::string& dst, uint16_t sport, uint16_t dport,
             const py::bytes& payload, uint8_t hop_limit) {
            return make_udp_packet(addr(src), addr(dst), sport, dport, from_py(payload),
                                   hop_limit);
          },
          py::arg("src"), py::arg("dst"), py::arg("sport"), py::arg("dport"),
          py::arg("payload") = py::bytes(), py::arg("hop_limit") = 64)
      .def_static(
          "decode", [](const py::bytes& wire) { return decode_packet(from_py(wire)); },
          "Raises ParseError on malformed input.")
      .def("encode", [](const Packet& p) { return to_py(encode_packet(p)); })
      .def_property_readonly("src", [](const Packet& p) { return p.outer().src.to_string(); })
      .def_property_readonly("dst", [](const Packet& p) { return p.outer().dst.to_string(); })
      .def_property_readonly("hop_limit", [](const Packet& p) { return p.outer().hop_limit; })
      .def_property_readonly("depth", [](const Packet& p) { return p.layers.size(); },
                             "Number of IPv6 headers.")
      .def("srhs", [](const Packet& p, size_t layer) { return p.layers.at(layer).srhs; },
           py::arg("layer") = 0)
      .def_property_readonly("ports",
                             [](const Packet& p) -> std::optional<std::pair<int, int>> {
                               if (!p.udp) return std::nullopt;
                               return std::make_pair(p.udp->src_port, p.udp->dst_port);
                             })
      .def_property_readonly("payload", [](const Packet& p) { return to_py(p.payload); })
      .def(
          "encapsulate",
          [](Packet& p, const Srh& srh, const std::string& src) {
            encapsulate(p, srh, addr(src));
          },
          py::arg("srh"), py::arg("src"), "Pushes an outer IPv6 header carrying the SRH.")
      .def(
          "advance",
          [](Packet& p) -> std::optional<std::string> {
            const auto r = end(p);
            if (!r) return std::nullopt;
            return to_string(*r);
          },
          "Applies End; returns the drop reason or None.")
      .def("__eq__", [](const Packet& a, const Packet& b) { return a == b; });

  m.def(
      "flow_hash",
      [](const std::string& src, const std::string& dst, uint32_t flow_label, uint16_t sport,
         uint16_t dport) { return flow_hash(FlowKey{addr(src), addr(dst), flow_label, sport, dport}); },
      py::arg("src"), py::arg("dst"), py::arg("flow_label") = 0, py::arg("sport") = 0,
      py::arg("dport") = 0, "FNV-1a 64 ECMP hash of a flow key.");

  m.def("iwrr_schedule",
        [](const std::vector<uint32_t>& w) { return usecases::iwrr_schedule(w); },
        "Path index per slot of one interleaved WRR cycle.");

  m.def(
      "scenario_info",
      [](const std::string& path) {
        const auto cfg = scenario::load_scenario(path);
        py::dict d;
        d["name"] = cfg.name;
        d["seed"] = cfg.seed;
        d["duration_ms"] = cfg.duration_ms;
        d["config_hash"] = cfg.config_hash;
        std::vector<std::string> nodes, links;
        for (const auto& n : cfg.nodes) nodes.push_back(n.id);
        for (const auto& l : cfg.links) links.push_back(l.id);
        d["nodes"] = nodes;
        d["links"] = links;
        return d;
      },
      py::arg("path"));

  m.def(
      "run",
      [](const std::string& path, std::optional<uint64_t> seed, std::optional<double> duration_ms,
         std::optional<uint64_t> packet_count, const std::string& out_dir) {
        return report_dict(cli::cmd_run(scenario::load_scenario(path),
                                        run_options(seed, duration_ms, packet_count, out_dir)));
      },
      py::arg("path"), py::arg("seed") = py::none(), py::arg("duration_ms") = py::none(),
      py::arg("packet_count") = py::none(), py::arg("out_dir") = "");

  m.def(
      "owd",
      [](const std::string& path, std::optional<uint32_t> ratio, std::optional<uint64_t> seed,
         std::optional<double> duration_ms, std::optional<uint64_t> packet_count,
         const std::string& out_dir) {
        auto o = run_options(seed, duration_ms, packet_count, out_dir);
        o.overrides.dm_ratio = ratio;
        return report_dict(cli::cmd_owd(scenario::load_scenario(path), o));
      },
      py::arg("path"), py::arg("ratio") = py::none(), py::arg("seed") = py::none(),
      py::arg("duration_ms") = py::none(), py::arg("packet_count") = py::none(),
      py::arg("out_dir") = "");

  m.def(
      "hybrid",
      [](const std::string& path, std::optional<bool> compensation, std::optional<uint64_t> seed,
         std::optional<double> duration_ms, std::optional<uint64_t> packet_count,
         const std::string& out_dir) {
        auto o = run_options(seed, duration_ms, packet_count, out_dir);
        o.overrides.compensation = compensation;
        return report_dict(cli::cmd_hybrid(scenario::load_scenario(path), o));
      },
      py::arg("path"), py::arg("compensation") = py::none(), py::arg("seed") = py::none(),
      py::arg("duration_ms") = py::none(), py::arg("packet_count") = py::none(),
      py::arg("out_dir") = "");

  m.def(
      "traceroute",
      [](const std::string& path, const std::string& src, const std::string& target,
         uint16_t flow_port, const std::vector<std::string>& no_oamp, double timeout_ms) {
        cli::TracerouteRequest req;
        req.src = src;
        req.target = target;
        req.options.src_port = flow_port;
        req.options.timeout_ns = static_cast<uint64_t>(timeout_ms * 1e6);
        cli::RunOptions o;
        o.overrides.disable_oamp.insert(no_oamp.begin(), no_oamp.end());
        return report_dict(cli::cmd_traceroute(scenario::load_scenario(path), req, o));
      },
      py::arg("path"), py::arg("src"), py::arg("target"), py::arg("flow_port") = 33000,
      py::arg("no_oamp") = std::vector<std::string>{}, py::arg("timeout_ms") = 3000.0);

  m.def(
      "bench",
      [](const std::vector<std::string>& functions, uint64_t packets, size_t batch) {
        cli::BenchOptions o;
        o.functions = functions;
        o.packets = packets;
        o.batch = batch;
        py::gil_scoped_release release;
        auto r = cli::cmd_bench(o);
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("functions") = std::vector<std::string>{}, py::arg("packets") = 200'000,
      py::arg("batch") = 1024);
}
