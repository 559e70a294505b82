#include <zlib.h>

#include <cstring>

#include "cycletrans/image_io.hpp"

namespace cycletrans {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

enum NiftiType : int16_t {
  DT_UINT8 = 2,
  DT_INT16 = 4,
  DT_INT32 = 8,
  DT_FLOAT32 = 16,
  DT_FLOAT64 = 64,
  DT_INT8 = 256,
  DT_UINT16 = 512,
  DT_UINT32 = 768,
};

template <typename T>
void byte_swap(T& v) {
  auto* p = reinterpret_cast<unsigned char*>(&v);
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

void swap_header(Nifti1Header& h) {
  byte_swap(h.sizeof_hdr);
  for (auto& d : h.dim) byte_swap(d);
  byte_swap(h.datatype);
  byte_swap(h.bitpix);
  for (auto& p : h.pixdim) byte_swap(p);
  byte_swap(h.vox_offset);
  byte_swap(h.scl_slope);
  byte_swap(h.scl_inter);
}

class GzReader {
 public:
  explicit GzReader(const std::filesystem::path& path) {
    file_ = gzopen(path.string().c_str(), "rb");
    if (!file_) throw IoError("cannot open '" + path.string() + "'");
  }
  ~GzReader() {
    if (file_) gzclose(file_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read_exact(void* dst, size_t bytes, const std::string& what) {
    auto* p = static_cast<unsigned char*>(dst);
    size_t remaining = bytes;
    while (remaining > 0) {
      const unsigned chunk = static_cast<unsigned>(std::min<size_t>(remaining, 1u << 30));
      const int got = gzread(file_, p, chunk);
      if (got <= 0) throw CorruptFileError("truncated NIfTI file while reading " + what);
      p += got;
      remaining -= static_cast<size_t>(got);
    }
  }

  void skip(size_t bytes) {
    std::vector<unsigned char> scratch(std::min<size_t>(std::max<size_t>(bytes, 1), 1 << 16));
    size_t remaining = bytes;
    while (remaining > 0) {
      const size_t chunk = std::min(remaining, scratch.size());
      read_exact(scratch.data(), chunk, "header padding");
      remaining -= chunk;
    }
  }

 private:
  gzFile file_ = nullptr;
};

template <typename T>
void decode_voxels(GzReader& reader, size_t count, bool swapped, double slope, double inter,
                   std::vector<double>& out) {
  std::vector<T> raw(count);
  reader.read_exact(raw.data(), count * sizeof(T), "voxel data");
  out.resize(count);
  for (size_t i = 0; i < count; ++i) {
    T v = raw[i];
    if (swapped && sizeof(T) > 1) byte_swap(v);
    out[i] = static_cast<double>(v) * slope + inter;
  }
}

}  // namespace

Volume read_nifti(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw IoError("volume not found: '" + path.string() + "'");
  GzReader reader(path);
  Nifti1Header hdr{};
  reader.read_exact(&hdr, sizeof(hdr), "header");

  bool swapped = false;
  if (hdr.sizeof_hdr != 348) {
    auto test = hdr.sizeof_hdr;
    byte_swap(test);
    if (test != 348) throw CorruptFileError("'" + path.string() + "': bad NIfTI header size");
    swapped = true;
    swap_header(hdr);
  }
  if (std::strncmp(hdr.magic, "n+1", 3) != 0) {
    if (std::strncmp(hdr.magic, "ni1", 3) == 0)
      throw CorruptFileError("'" + path.string() + "': detached .hdr/.img pairs unsupported");
    throw CorruptFileError("'" + path.string() + "': missing NIfTI magic");
  }
  if (hdr.dim[0] < 2 || hdr.dim[0] > 4)
    throw CorruptFileError("'" + path.string() + "': unsupported dimensionality " +
                           std::to_string(hdr.dim[0]));
  for (int d = 4; d <= hdr.dim[0]; ++d)
    if (hdr.dim[d] > 1)
      throw CorruptFileError("'" + path.string() + "': time series volumes unsupported");

  Volume v;
  v.nx = hdr.dim[1];
  v.ny = hdr.dim[2];
  v.nz = hdr.dim[0] >= 3 ? std::max<int16_t>(hdr.dim[3], 1) : 1;
  v.sx = hdr.pixdim[1] > 0 ? hdr.pixdim[1] : 1.0;
  v.sy = hdr.pixdim[2] > 0 ? hdr.pixdim[2] : 1.0;
  v.sz = hdr.pixdim[3] > 0 ? hdr.pixdim[3] : 1.0;
  v.id = path.stem().string();
  if (v.id.ends_with(".nii")) v.id.resize(v.id.size() - 4);
  v.modality_tag = std::string(hdr.descrip, strnlen(hdr.descrip, sizeof(hdr.descrip)));

  if (v.nx < 1 || v.ny < 1 || v.nz < 1)
    throw CorruptFileError("'" + path.string() + "': non-positive dimension");

  const double slope = hdr.scl_slope != 0.0f ? hdr.scl_slope : 1.0;
  const double inter = hdr.scl_slope != 0.0f ? hdr.scl_inter : 0.0;
  const size_t count = static_cast<size_t>(v.nx) * v.ny * v.nz;

  if (hdr.vox_offset < 348)
    throw CorruptFileError("'" + path.string() + "': vox_offset inside header");
  reader.skip(static_cast<size_t>(hdr.vox_offset) - sizeof(hdr));

  switch (hdr.datatype) {
    case DT_UINT8: decode_voxels<uint8_t>(reader, count, swapped, slope, inter, v.voxels); break;
    case DT_INT8: decode_voxels<int8_t>(reader, count, swapped, slope, inter, v.voxels); break;
    case DT_INT16: decode_voxels<int16_t>(reader, count, swapped, slope, inter, v.voxels); break;
    case DT_UINT16: decode_voxels<uint16_t>(reader, count, swapped, slope, inter, v.voxels); break;
    case DT_INT32: decode_voxels<int32_t>(reader, count, swapped, slope, inter, v.voxels); break;
    case DT_UINT32: decode_voxels<uint32_t>(reader, count, swapped, slope, inter, v.voxels); break;
    case DT_FLOAT32: decode_voxels<float>(reader, count, swapped, slope, inter, v.voxels); break;
    case DT_FLOAT64: decode_voxels<double>(reader, count, swapped, slope, inter, v.voxels); break;
    default:
      throw CorruptFileError("'" + path.string() + "': unsupported datatype " +
                             std::to_string(hdr.datatype));
  }
  v.validate();
  return v;
}

void write_nifti(const std::filesystem::path& path, const Volume& v) {
  Nifti1Header hdr{};
  hdr.sizeof_hdr = 348;
  hdr.regular = 'r';
  hdr.dim[0] = 3;
  hdr.dim[1] = static_cast<int16_t>(v.nx);
  hdr.dim[2] = static_cast<int16_t>(v.ny);
  hdr.dim[3] = static_cast<int16_t>(v.nz);
  for (int d = 4; d < 8; ++d) hdr.dim[d] = 1;
  hdr.datatype = DT_FLOAT64;
  hdr.bitpix = 64;
  hdr.pixdim[0] = 1.0f;
  hdr.pixdim[1] = static_cast<float>(v.sx);
  hdr.pixdim[2] = static_cast<float>(v.sy);
  hdr.pixdim[3] = static_cast<float>(v.sz);
  hdr.vox_offset = 352.0f;
  hdr.scl_slope = 1.0f;
  hdr.scl_inter = 0.0f;
  std::snprintf(hdr.descrip, sizeof(hdr.descrip), "%s", v.modality_tag.c_str());
  std::memcpy(hdr.magic, "n+1", 4);

  const char extender[4] = {0, 0, 0, 0};
  // "T" writes stored (uncompressed) data for plain .nii
  gzFile f = gzopen(path.string().c_str(), path.extension() == ".gz" ? "wb" : "wbT");
  if (!f) throw IoError("cannot create '" + path.string() + "'");
  bool ok = gzwrite(f, &hdr, sizeof(hdr)) == static_cast<int>(sizeof(hdr)) &&
            gzwrite(f, extender, 4) == 4;
  const size_t bytes = v.voxels.size() * sizeof(double);
  size_t written = 0;
  const auto* p = reinterpret_cast<const unsigned char*>(v.voxels.data());
  while (ok && written < bytes) {
    const unsigned chunk = static_cast<unsigned>(std::min<size_t>(bytes - written, 1u << 30));
    ok = gzwrite(f, p + written, chunk) == static_cast<int>(chunk);
    written += chunk;
  }
  gzclose(f);
  if (!ok) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace cycletrans
