#include "sanet/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <png.h>

#include "sanet/rng.hpp"

namespace fs = std::filesystem;

namespace sanet {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("IDX file '" + path + "': truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<int> read_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open label file '" + path + "'");
    const std::uint32_t magic = read_be32(in, path);
    if (magic != kIdxLabelsMagic) {
        std::ostringstream os;
        os << "IDX label file '" << path << "': bad magic 0x" << std::hex << magic;
        throw FormatError(os.str());
    }
    const std::uint32_t count = read_be32(in, path);
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), count);
    if (!in && count > 0) throw FormatError("IDX label file '" + path + "': truncated payload");
    return std::vector<int>(raw.begin(), raw.end());
}

struct DecodedImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<unsigned char> pixels; // row-major (row, col, channel)
};

// --- PNG ---------------------------------------------------------------

DecodedImage decode_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw FormatError("cannot open '" + path + "'");
    png_byte header[8];
    if (std::fread(header, 1, 8, fp) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        std::fclose(fp);
        throw FormatError("'" + path + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError("libpng initialization failed for '" + path + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError("PNG decode failed for '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // normalize to 8-bit gray/rgb, dropping alpha against white is not
    // wanted here: strip alpha entirely
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    png_read_update_info(png, info);

    DecodedImage img;
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width * img.channels);

    std::vector<png_bytep> rows(img.height);
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    for (int r = 0; r < img.height; ++r) rows[r] = img.pixels.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

// --- PGM (binary P5) ----------------------------------------------------

int pnm_token(std::istream& in) {
    // skips whitespace and '#' comments
    int c = in.get();
    while (in && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (in && c != '\n') c = in.get();
        }
        c = in.get();
    }
    int value = 0;
    bool any = false;
    while (in && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw FormatError("PGM header: expected integer");
    return value;
}

DecodedImage decode_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') throw FormatError("'" + path + "' is not a binary PGM (P5)");
    DecodedImage img;
    img.width = pnm_token(in);
    img.height = pnm_token(in);
    const int maxval = pnm_token(in);
    if (maxval <= 0 || maxval > 255) throw FormatError("'" + path + "': unsupported PGM maxval");
    img.channels = 1;
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!in) throw FormatError("'" + path + "': truncated PGM payload");
    if (maxval != 255) {
        for (auto& p : img.pixels)
            p = static_cast<unsigned char>(std::lround(255.0 * p / maxval));
    }
    return img;
}

// --- BMP (uncompressed 8/24-bit) -----------------------------------------

std::uint32_t le32(const unsigned char* p) {
    return p[0] | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

DecodedImage decode_bmp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 54 || buf[0] != 'B' || buf[1] != 'M')
        throw FormatError("'" + path + "' is not a BMP file");
    const std::uint32_t data_offset = le32(&buf[10]);
    const std::uint32_t header_size = le32(&buf[14]);
    if (header_size < 40) throw FormatError("'" + path + "': unsupported BMP header");
    const std::int32_t width = static_cast<std::int32_t>(le32(&buf[18]));
    std::int32_t height = static_cast<std::int32_t>(le32(&buf[22]));
    const std::uint16_t bpp = le16(&buf[28]);
    const std::uint32_t compression = le32(&buf[30]);
    if (compression != 0 || (bpp != 8 && bpp != 24))
        throw FormatError("'" + path + "': only uncompressed 8/24-bit BMP supported");
    const bool bottom_up = height > 0;
    height = std::abs(height);

    DecodedImage img;
    img.width = width;
    img.height = height;
    img.channels = (bpp == 8) ? 1 : 3;
    img.pixels.resize(static_cast<std::size_t>(width) * height * img.channels);

    // 8-bit BMPs carry a palette right after the info header
    const unsigned char* palette = (bpp == 8) ? &buf[14 + header_size] : nullptr;
    const std::size_t row_bytes = (static_cast<std::size_t>(width) * bpp / 8 + 3) & ~std::size_t(3);
    if (data_offset + row_bytes * height > buf.size())
        throw FormatError("'" + path + "': truncated BMP payload");

    for (int r = 0; r < height; ++r) {
        const int src_row = bottom_up ? (height - 1 - r) : r;
        const unsigned char* src = &buf[data_offset + row_bytes * src_row];
        for (int c = 0; c < width; ++c) {
            if (bpp == 8) {
                const unsigned char idx = src[c];
                // palette entries are BGRA; use the blue channel of a gray
                // palette (identical across channels for grayscale BMPs)
                img.pixels[static_cast<std::size_t>(r) * width + c] = palette[4 * idx];
            } else {
                const unsigned char* px = src + 3 * c;
                unsigned char* dst = &img.pixels[(static_cast<std::size_t>(r) * width + c) * 3];
                dst[0] = px[2];
                dst[1] = px[1];
                dst[2] = px[0];
            }
        }
    }
    return img;
}

DecodedImage decode_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") return decode_png(p.string());
    if (ext == ".pgm") return decode_pgm(p.string());
    if (ext == ".bmp") return decode_bmp(p.string());
    throw FormatError("'" + p.string() + "': unsupported extension (expected .png/.pgm/.bmp)");
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".pgm" || ext == ".bmp";
}

ImageTensor to_tensor(const DecodedImage& d, std::int64_t index) {
    ImageTensor t(d.height, d.width, d.channels, index);
    for (std::size_t i = 0; i < d.pixels.size(); ++i) t.data[i] = d.pixels[i] / 255.0;
    return t;
}

} // namespace

LabeledDataset load_idx(const std::string& images_path, const std::optional<std::string>& labels_path) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw FormatError("cannot open IDX image file '" + images_path + "'");
    const std::uint32_t magic = read_be32(in, images_path);
    if (magic != kIdxImagesMagic) {
        std::ostringstream os;
        os << "IDX image file '" << images_path << "': bad magic 0x" << std::hex << magic;
        throw FormatError(os.str());
    }
    const std::uint32_t count = read_be32(in, images_path);
    const std::uint32_t rows = read_be32(in, images_path);
    const std::uint32_t cols = read_be32(in, images_path);
    if (count > 0 && (rows == 0 || cols == 0))
        throw FormatError("IDX image file '" + images_path + "': zero image dimension");

    LabeledDataset d;
    d.name = fs::path(images_path).filename().string();
    d.images.reserve(count);
    std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in) throw FormatError("IDX image file '" + images_path + "': truncated at image " + std::to_string(i));
        ImageTensor t(static_cast<int>(rows), static_cast<int>(cols), 1, i);
        for (std::size_t p = 0; p < raw.size(); ++p) t.data[p] = raw[p] / 255.0;
        d.images.push_back(std::move(t));
    }

    if (labels_path) {
        std::vector<int> labels = read_idx_labels(*labels_path);
        if (labels.size() != d.images.size()) {
            throw ConsistencyError("label count " + std::to_string(labels.size()) +
                                   " does not match image count " + std::to_string(d.images.size()));
        }
        d.labels = std::move(labels);
    }
    d.validate();
    return d;
}

void save_idx(const LabeledDataset& d, const std::string& images_path,
              const std::optional<std::string>& labels_path) {
    if (!d.images.empty() && d.channels() != 1)
        throw ConsistencyError("IDX serialization requires single-channel images");
    std::ofstream out(images_path, std::ios::binary);
    if (!out) throw FormatError("cannot write IDX image file '" + images_path + "'");
    write_be32(out, kIdxImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(d.images.size()));
    write_be32(out, static_cast<std::uint32_t>(d.height()));
    write_be32(out, static_cast<std::uint32_t>(d.width()));
    std::vector<unsigned char> raw;
    for (const ImageTensor& im : d.images) {
        raw.resize(im.data.size());
        for (std::size_t i = 0; i < im.data.size(); ++i)
            raw[i] = static_cast<unsigned char>(std::lround(std::clamp(im.data[i], 0.0, 1.0) * 255.0));
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    }
    if (labels_path) {
        if (!d.labels) throw ConsistencyError("dataset has no labels to serialize");
        std::ofstream lout(*labels_path, std::ios::binary);
        if (!lout) throw FormatError("cannot write IDX label file '" + *labels_path + "'");
        write_be32(lout, kIdxLabelsMagic);
        write_be32(lout, static_cast<std::uint32_t>(d.labels->size()));
        for (int v : *d.labels) lout.put(static_cast<char>(static_cast<unsigned char>(v)));
    }
}

ImageTensor convert_channels(const ImageTensor& im, int channels) {
    if (channels == 0 || channels == im.channels) return im;
    ImageTensor out(im.height, im.width, channels, im.source_index);
    for (int r = 0; r < im.height; ++r) {
        for (int c = 0; c < im.width; ++c) {
            if (channels == 1 && im.channels == 3) {
                out.at(r, c, 0) = 0.299 * im.at(r, c, 0) + 0.587 * im.at(r, c, 1) + 0.114 * im.at(r, c, 2);
            } else if (channels == 3 && im.channels == 1) {
                for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = im.at(r, c, 0);
            } else {
                throw ParameterError("unsupported channel conversion " + std::to_string(im.channels) +
                                     " -> " + std::to_string(channels));
            }
        }
    }
    return out;
}

LabeledDataset load_image_dir(const std::string& root, bool class_from_subdir, int channels) {
    if (!fs::is_directory(root)) throw FormatError("'" + root + "' is not a directory");

    // lexicographic byte order of relative paths fixes both label and index
    // assignment
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
        return a.lexically_relative(root).string() < b.lexically_relative(root).string();
    });

    LabeledDataset d;
    d.name = fs::path(root).filename().string();
    std::map<std::string, int> class_ids;
    std::vector<int> labels;
    std::vector<std::string> failures;

    for (std::size_t i = 0; i < files.size(); ++i) {
        try {
            DecodedImage raw = decode_image_file(files[i]);
            ImageTensor t = convert_channels(to_tensor(raw, static_cast<std::int64_t>(i)), channels);
            d.images.push_back(std::move(t));
        } catch (const FormatError& e) {
            failures.push_back(e.what());
            continue;
        }
        if (class_from_subdir) {
            const fs::path rel = files[i].lexically_relative(root);
            const std::string cls = rel.has_parent_path() ? rel.begin()->string() : std::string();
            auto [it, inserted] = class_ids.emplace(cls, static_cast<int>(class_ids.size()));
            labels.push_back(it->second);
        }
    }
    if (!failures.empty()) {
        std::ostringstream os;
        os << failures.size() << " file(s) failed to decode:";
        for (const std::string& f : failures) os << "\n  " << f;
        throw FormatError(os.str());
    }
    if (class_from_subdir) d.labels = std::move(labels);

    // uniform shape is required; resizing is the caller's explicit choice
    for (const ImageTensor& im : d.images) {
        if (im.height != d.height() || im.width != d.width() || im.channels != d.channels()) {
            throw ConsistencyError("directory '" + root + "' mixes image shapes (" +
                                   std::to_string(d.height()) + "x" + std::to_string(d.width()) +
                                   " vs " + std::to_string(im.height) + "x" + std::to_string(im.width) +
                                   "); pass a resize request");
        }
    }
    d.validate();
    return d;
}

ImageTensor resize_bilinear(const ImageTensor& im, int h, int w) {
    if (h < 1 || w < 1) throw ParameterError("resize target must be at least 1x1");
    ImageTensor out(h, w, im.channels, im.source_index);
    const double sy = static_cast<double>(im.height) / h;
    const double sx = static_cast<double>(im.width) / w;
    for (int r = 0; r < h; ++r) {
        // center-aligned sample positions; reduces to the identity map when
        // the shape is unchanged
        const double fy = (r + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, im.height - 1);
        const int y1 = std::min(y0 + 1, im.height - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int c = 0; c < w; ++c) {
            const double fx = (c + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, im.width - 1);
            const int x1 = std::min(x0 + 1, im.width - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int ch = 0; ch < im.channels; ++ch) {
                const double top = (1.0 - wx) * im.at(y0, x0, ch) + wx * im.at(y0, x1, ch);
                const double bot = (1.0 - wx) * im.at(y1, x0, ch) + wx * im.at(y1, x1, ch);
                out.at(r, c, ch) = std::clamp((1.0 - wy) * top + wy * bot, 0.0, 1.0);
            }
        }
    }
    return out;
}

LabeledDataset resize_bilinear(const LabeledDataset& d, int h, int w) {
    LabeledDataset out;
    out.name = d.name;
    out.labels = d.labels;
    out.images.reserve(d.images.size());
    for (const ImageTensor& im : d.images) out.images.push_back(resize_bilinear(im, h, w));
    return out;
}

LabeledDataset stratified_subset(const LabeledDataset& d, int per_class, std::uint64_t seed) {
    if (!d.labels) throw ParameterError("stratified_subset requires labels");
    if (per_class < 1) throw ParameterError("per_class must be positive");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < d.images.size(); ++i) by_class[(*d.labels)[i]].push_back(i);

    std::vector<std::size_t> chosen;
    Rng root(seed);
    for (auto& [cls, members] : by_class) {
        if (static_cast<int>(members.size()) < per_class) {
            throw CapacityError("class " + std::to_string(cls) + " has only " +
                                std::to_string(members.size()) + " members, need " +
                                std::to_string(per_class));
        }
        Rng rng = root.derive("stratified_subset/class", static_cast<std::uint64_t>(cls));
        // Fisher-Yates prefix of length per_class
        std::vector<std::size_t> pool = members;
        for (int i = 0; i < per_class; ++i) {
            const std::size_t j = i + rng.uniform_int(pool.size() - i);
            std::swap(pool[i], pool[j]);
            chosen.push_back(pool[i]);
        }
    }
    std::sort(chosen.begin(), chosen.end());

    LabeledDataset out;
    out.name = d.name + "/subset";
    out.labels = std::vector<int>();
    for (std::size_t idx : chosen) {
        out.images.push_back(d.images[idx]);
        out.labels->push_back((*d.labels)[idx]);
    }
    return out;
}

} // namespace sanet
