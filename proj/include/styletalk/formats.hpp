#pragma once

// On-disk formats.
//
// Motion file (binary, little-endian):
//   "MVEC" | u32 version=1 | u32 N | u32 D=64 | f32 fps | N*D f32 row-major
// Phoneme file:   {"fps":30,"vocab":V,"labels":[...]}
// Style code:     {"dim":d,"values":[...]}
// Face split:     {"lower":[13 ints]}

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "styletalk/core.hpp"

namespace styletalk {

inline constexpr char kMotionMagic[4] = {'M', 'V', 'E', 'C'};
inline constexpr std::uint32_t kMotionVersion = 1;
inline constexpr std::size_t kMotionHeaderBytes = 20;

std::vector<std::uint8_t> encode_motion(const MotionSequence& m);
MotionSequence decode_motion(const std::vector<std::uint8_t>& bytes);

void write_motion(const std::filesystem::path& path, const MotionSequence& m);
MotionSequence read_motion(const std::filesystem::path& path);

void write_phonemes(const std::filesystem::path& path, const PhonemeSequence& p);
PhonemeSequence read_phonemes(const std::filesystem::path& path);

void write_style_code(const std::filesystem::path& path, const StyleCode& s);
StyleCode read_style_code(const std::filesystem::path& path);

void write_face_split(const std::filesystem::path& path, const FaceSplit& s);
FaceSplit read_face_split(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);
std::uint32_t get_u32(const std::uint8_t* p);
std::uint64_t get_u64(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);
double get_f64(const std::uint8_t* p);
}  // namespace le

}  // namespace styletalk
