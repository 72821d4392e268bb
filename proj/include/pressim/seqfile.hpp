#pragma once

// Bit-exact binary sequence files, little-endian throughout:
//   magic "PSIM", version u16 = 1, kind u8, reserved u8 = 0, frame_count u32,
//   frame_count f64 timestamps, then per-frame payload:
//     POSE17 17x3 f32 | POSE25 25x3 f32 | DEFORM 2240 u8 | PRESSURE 2240 f32
// Grids are row-major, 80 rows by 28 columns.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pressim/core.hpp"
#include "pressim/pose.hpp"

namespace pressim {

enum class SequenceKind : std::uint8_t {
  Pose17 = 0,
  Pose25 = 1,
  Deform = 2,
  Pressure = 3,
};

inline const char* to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::Pose17: return "POSE17";
    case SequenceKind::Pose25: return "POSE25";
    case SequenceKind::Deform: return "DEFORM";
    case SequenceKind::Pressure: return "PRESSURE";
  }
  return "?";
}

struct SequenceFile {
  SequenceKind kind = SequenceKind::Pressure;
  std::vector<double> timestamps;
  // Exactly one of these is populated, matching kind.
  std::vector<std::vector<Vec3>> pose_frames;       // J x (x,y,z)
  std::vector<DeformationFrame> deform_frames;
  std::vector<PressureFrame> pressure_frames;

  std::size_t frame_count() const { return timestamps.size(); }
};

namespace io_detail {

inline constexpr char kMagic[4] = {'P', 'S', 'I', 'M'};
inline constexpr std::uint16_t kVersion = 1;

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}
inline void put_u16(std::string& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>(v >> 8)};
  put_bytes(out, b, 2);
}
inline void put_u32(std::string& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}
inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}
inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>(bits >> (8 * i));
  put_bytes(out, b, 8);
}

class Reader {
 public:
  Reader(std::string data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size())
      throw FormatError("truncated file: " + path_);
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
      v |= static_cast<std::uint16_t>(
          static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
          static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(
          static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == data_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace io_detail

inline void write_sequence(const std::string& path, const SequenceFile& seq) {
  using namespace io_detail;
  const std::size_t n = seq.frame_count();
  for (std::size_t i = 1; i < n; ++i)
    if (!(seq.timestamps[i] > seq.timestamps[i - 1]))
      throw FormatError("timestamps not strictly increasing at frame " +
                        std::to_string(i));

  const int expected_joints = seq.kind == SequenceKind::Pose17  ? 17
                              : seq.kind == SequenceKind::Pose25 ? 25
                                                                 : 0;
  std::string out;
  put_bytes(out, kMagic, 4);
  put_u16(out, kVersion);
  out.push_back(static_cast<char>(seq.kind));
  out.push_back(0);  // reserved
  put_u32(out, static_cast<std::uint32_t>(n));
  for (double t : seq.timestamps) put_f64(out, t);

  switch (seq.kind) {
    case SequenceKind::Pose17:
    case SequenceKind::Pose25:
      if (seq.pose_frames.size() != n)
        throw ShapeMismatch("pose frame count != timestamp count");
      for (const auto& frame : seq.pose_frames) {
        if (static_cast<int>(frame.size()) != expected_joints)
          throw ShapeMismatch("pose frame has " +
                              std::to_string(frame.size()) + " joints, " +
                              std::string(to_string(seq.kind)) + " expects " +
                              std::to_string(expected_joints));
        for (const Vec3& v : frame) {
          put_f32(out, static_cast<float>(v.x));
          put_f32(out, static_cast<float>(v.y));
          put_f32(out, static_cast<float>(v.z));
        }
      }
      break;
    case SequenceKind::Deform:
      if (seq.deform_frames.size() != n)
        throw ShapeMismatch("deformation frame count != timestamp count");
      for (const auto& frame : seq.deform_frames)
        put_bytes(out, frame.data(), kGridCells);
      break;
    case SequenceKind::Pressure:
      if (seq.pressure_frames.size() != n)
        throw ShapeMismatch("pressure frame count != timestamp count");
      for (const auto& frame : seq.pressure_frames)
        for (int i = 0; i < kGridCells; ++i) put_f32(out, frame.values[i]);
      break;
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoFailure("write failed: " + path);
}

inline SequenceFile read_sequence(const std::string& path) {
  using namespace io_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open for reading: " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (!f.good() && !f.eof()) throw IoFailure("read failed: " + path);
  Reader r(std::move(data), path);

  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in " + path);
  const std::uint16_t version = r.u16();
  if (version != kVersion)
    throw FormatError("unsupported version " + std::to_string(version) +
                      " in " + path);
  const std::uint8_t kind_byte = r.u8();
  if (kind_byte > 3) throw FormatError("bad sequence kind in " + path);
  r.u8();  // reserved
  const std::uint32_t n = r.u32();

  SequenceFile seq;
  seq.kind = static_cast<SequenceKind>(kind_byte);
  seq.timestamps.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) seq.timestamps[i] = r.f64();
  for (std::uint32_t i = 1; i < n; ++i)
    if (!(seq.timestamps[i] > seq.timestamps[i - 1]))
      throw FormatError("non-monotonic timestamps in " + path);

  switch (seq.kind) {
    case SequenceKind::Pose17:
    case SequenceKind::Pose25: {
      const int J = seq.kind == SequenceKind::Pose17 ? 17 : 25;
      seq.pose_frames.resize(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        seq.pose_frames[i].resize(J);
        for (int j = 0; j < J; ++j) {
          seq.pose_frames[i][j].x = r.f32();
          seq.pose_frames[i][j].y = r.f32();
          seq.pose_frames[i][j].z = r.f32();
        }
      }
      break;
    }
    case SequenceKind::Deform:
      seq.deform_frames.resize(n);
      for (std::uint32_t i = 0; i < n; ++i)
        r.raw(seq.deform_frames[i].data(), kGridCells);
      break;
    case SequenceKind::Pressure:
      seq.pressure_frames.resize(n);
      for (std::uint32_t i = 0; i < n; ++i)
        for (int c = 0; c < kGridCells; ++c)
          seq.pressure_frames[i].values[c] = r.f32();
      break;
  }
  if (!r.at_end()) throw FormatError("trailing bytes in " + path);
  return seq;
}

// Convenience constructors.
inline SequenceFile to_sequence_file(const PoseSequence& poses) {
  SequenceFile seq;
  seq.kind = poses.skeleton.kind == SkeletonKind::Coco17
                 ? SequenceKind::Pose17
                 : SequenceKind::Pose25;
  seq.timestamps = poses.timestamps;
  seq.pose_frames.reserve(poses.size());
  for (const auto& f : poses.frames) seq.pose_frames.push_back(f.joints);
  return seq;
}

inline PoseSequence to_pose_sequence(const SequenceFile& file,
                                     const RadiusTable& table = RadiusTable{}) {
  if (file.kind != SequenceKind::Pose17 && file.kind != SequenceKind::Pose25)
    throw KindMismatch(std::string("expected a pose sequence, got ") +
                       to_string(file.kind));
  PoseSequence poses;
  poses.skeleton = build_skeleton(file.kind == SequenceKind::Pose17
                                      ? SkeletonKind::Coco17
                                      : SkeletonKind::Body25,
                                  table);
  poses.timestamps = file.timestamps;
  poses.frames.resize(file.pose_frames.size());
  for (std::size_t i = 0; i < file.pose_frames.size(); ++i)
    poses.frames[i].joints = file.pose_frames[i];
  return poses;
}

// 8-bit binary PGM, 28 wide x 80 tall, for visual inspection.
inline void write_pgm(const std::string& path, const DeformationFrame& frame) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path);
  f << "P5\n28 80\n255\n";
  f.write(reinterpret_cast<const char*>(frame.data()), kGridCells);
  if (!f) throw IoFailure("write failed: " + path);
}

}  // namespace pressim
