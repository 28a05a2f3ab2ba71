#include "trajverb/sim/episode_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace trajverb::sim {
namespace {

std::string num(double v) { return fmt::format("{:.9g}", v); }

}  // namespace

std::string episode_to_json(const Episode& ep) {
  const SceneConfig& c = ep.config;
  std::string out;
  out.reserve(ep.frames.size() * 200 + 512);
  out += fmt::format("{{\"seed\":{},\"script_tag\":\"{}\",\"script_start\":{},\"frame_count\":{},",
                     ep.seed, to_string(ep.script_tag), ep.script_start, ep.frames.size());
  out += fmt::format(
      "\"config\":{{\"gravity\":{},\"counter_height\":{},\"counter_extent\":{},"
      "\"object_shape\":\"{}\",\"object_radius\":{},\"friction_mu\":{},\"restitution\":{},"
      "\"hand_speed\":{}}},\n\"frames\":[",
      num(c.gravity), num(c.counter_height), num(c.counter_extent), to_string(c.object_shape),
      num(c.object_radius), num(c.friction_mu), num(c.restitution), num(c.hand_speed));
  for (std::size_t i = 0; i < ep.frames.size(); ++i) {
    const Frame& f = ep.frames[i];
    const auto& q = f.obj_rot;
    out += fmt::format("{}\n[{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}]",
                       i == 0 ? "" : ",", f.t_index, num(f.hand_pos.x()), num(f.hand_pos.y()),
                       num(f.hand_pos.z()), num(f.obj_pos.x()), num(f.obj_pos.y()),
                       num(f.obj_pos.z()), num(q.x()), num(q.y()), num(q.z()), num(q.w()),
                       num(f.obj_vel.x()), num(f.obj_vel.y()), num(f.obj_vel.z()),
                       num(f.obj_angvel.x()), num(f.obj_angvel.y()), num(f.obj_angvel.z()),
                       static_cast<int>(f.contact));
  }
  out += "\n]}\n";
  return out;
}

Episode episode_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  Episode ep;
  ep.seed = doc.at("seed").get<std::uint64_t>();
  ep.script_tag = script_from_string(doc.at("script_tag").get<std::string>());
  ep.script_start = doc.value("script_start", std::int64_t{0});
  const auto& c = doc.at("config");
  ep.config.gravity = c.at("gravity").get<double>();
  ep.config.counter_height = c.at("counter_height").get<double>();
  ep.config.counter_extent = c.at("counter_extent").get<double>();
  ep.config.object_shape = shape_from_string(c.at("object_shape").get<std::string>());
  ep.config.object_radius = c.at("object_radius").get<double>();
  ep.config.friction_mu = c.at("friction_mu").get<double>();
  ep.config.restitution = c.at("restitution").get<double>();
  ep.config.hand_speed = c.at("hand_speed").get<double>();
  ep.config.randomize_materials = false;

  const auto& frames = doc.at("frames");
  const auto count = doc.at("frame_count").get<std::size_t>();
  if (frames.size() != count) {
    throw Error(fmt::format("episode {}: frame_count {} but {} frames", ep.seed, count, frames.size()));
  }
  ep.frames.reserve(count);
  for (const auto& row : frames) {
    if (row.size() != 18) throw Error(fmt::format("episode {}: frame row has {} fields", ep.seed, row.size()));
    Frame f;
    f.t_index = row[0].get<std::int64_t>();
    f.hand_pos = Vec3(row[1].get<double>(), row[2].get<double>(), row[3].get<double>());
    f.obj_pos = Vec3(row[4].get<double>(), row[5].get<double>(), row[6].get<double>());
    f.obj_rot = Quat(row[10].get<double>(), row[7].get<double>(), row[8].get<double>(),
                     row[9].get<double>());
    f.obj_vel = Vec3(row[11].get<double>(), row[12].get<double>(), row[13].get<double>());
    f.obj_angvel = Vec3(row[14].get<double>(), row[15].get<double>(), row[16].get<double>());
    const int code = row[17].get<int>();
    if (code < 0 || code > 3) throw Error(fmt::format("episode {}: bad contact code {}", ep.seed, code));
    f.contact = static_cast<Contact>(code);
    ep.frames.push_back(f);
  }
  return ep;
}

void write_episode(const std::filesystem::path& path, const Episode& episode) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << episode_to_json(episode);
}

Episode read_episode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return episode_from_json(buf.str());
}

}  // namespace trajverb::sim
