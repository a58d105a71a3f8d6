#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pairsift/corpus.hpp"
#include "pairsift/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace pairsift;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "pairsift_test_corpus";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_text(const std::string& name, const std::string& content) {
  const fs::path path = temp_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

fs::path write_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const fs::path path = temp_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  return path;
}

}  // namespace

TEST_CASE("load_manifest reads records in file order") {
  const auto path = write_text("ok.jsonl",
      R"({"id":"a","image_path":"","caption":"first"})" "\n"
      R"({"id":"b","image_path":"","caption":"second","meta":{"src":"web"}})" "\n");
  const Manifest m = load_manifest(path);
  REQUIRE(m.size() == 2);
  CHECK(m.samples[0].id == "a");
  CHECK(m.samples[1].id == "b");
  CHECK(m.samples[0].caption == "first");
  CHECK(m.samples[1].meta.at("src") == "web");
  CHECK(m.find("b") != nullptr);
  CHECK(m.find("zz") == nullptr);
}

TEST_CASE("load_manifest rejects duplicate ids naming the offender") {
  const auto path = write_text("dup.jsonl",
      R"({"id":"a","image_path":"","caption":"x"})" "\n"
      R"({"id":"a","image_path":"","caption":"y"})" "\n");
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("'a'"),
                       std::runtime_error);
}

TEST_CASE("load_manifest accepts an empty file") {
  const auto path = write_text("empty.jsonl", "");
  CHECK(load_manifest(path).empty());
}

TEST_CASE("load_manifest reports the malformed line number") {
  const auto path = write_text("bad.jsonl",
      R"({"id":"a","image_path":"","caption":"x"})" "\n"
      "{not json\n");
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("line 2"),
                       std::runtime_error);
}

TEST_CASE("load_manifest rejects whitespace ids and invalid UTF-8") {
  const auto ws = write_text("ws.jsonl", R"({"id":"a b","image_path":"","caption":""})" "\n");
  CHECK_THROWS(load_manifest(ws));
  // 0xFF is never valid in UTF-8; json parsing must fail.
  const auto utf = write_bytes("utf.jsonl", {'{', '"', 'i', 'd', '"', ':', '"', 'a',
                                             '"', ',', '"', 'i', 'm', 'a', 'g', 'e',
                                             '_', 'p', 'a', 't', 'h', '"', ':', '"',
                                             '"', ',', '"', 'c', 'a', 'p', 't', 'i',
                                             'o', 'n', '"', ':', '"', 0xFF, '"', '}',
                                             '\n'});
  CHECK_THROWS(load_manifest(utf));
}

TEST_CASE("manifest round trip preserves ids and captions exactly") {
  Manifest m;
  m.samples.push_back({"alpha", "", "A  caption with   spaces ", {}});
  m.samples.push_back({"beta", "", "unicode: éè 你好", {{"k", "v"}}});
  m.samples.push_back({"gamma", "", "", {}});
  m.rebuild_index();
  const fs::path path = temp_dir() / "roundtrip.jsonl";
  write_manifest(m, path);
  const Manifest back = load_manifest(path);
  REQUIRE(back.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(back.samples[i].id == m.samples[i].id);
    CHECK(back.samples[i].caption == m.samples[i].caption);
  }
}

TEST_CASE("load_manifest resolves relative image paths against its directory") {
  const auto path = write_text("rel.jsonl",
      R"({"id":"a","image_path":"imgs/x.pgm","caption":""})" "\n");
  const Manifest m = load_manifest(path);
  CHECK(fs::path(m.samples[0].image_path) == temp_dir() / "imgs/x.pgm");
}

TEST_CASE("load_score_table parses cells and reorders rows to manifest order") {
  const auto mpath = write_text("m1.jsonl",
      R"({"id":"a","image_path":"","caption":""})" "\n"
      R"({"id":"b","image_path":"","caption":""})" "\n");
  const Manifest m = load_manifest(mpath);

  SUBCASE("single cell") {
    const auto spath = write_text("s1.csv", "sample_id,clip\na,0.31\n");
    const ScoreTable t = load_score_table(spath, m);
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 1);
    CHECK(t.cells(0, 0) == 0.31);
    CHECK(is_missing(t.cells(1, 0)));  // b has no row
  }
  SUBCASE("file order does not matter") {
    const auto spath = write_text("s2.csv", "sample_id,clip\nb,0.2\na,0.1\n");
    const ScoreTable t = load_score_table(spath, m);
    CHECK(t.sample_ids[0] == "a");
    CHECK(t.cells(0, 0) == 0.1);
    CHECK(t.cells(1, 0) == 0.2);
  }
  SUBCASE("blank cell becomes missing, not zero") {
    const auto spath = write_text("s3.csv", "sample_id,clip,icc\na,,0.5\n");
    const ScoreTable t = load_score_table(spath, m);
    CHECK(is_missing(t.cells(0, 0)));
    CHECK(t.cells(0, 1) == 0.5);
  }
  SUBCASE("unknown id is an error naming it") {
    const auto spath = write_text("s4.csv", "sample_id,clip\nzz,0.3\n");
    CHECK_THROWS_WITH_AS(load_score_table(spath, m), doctest::Contains("zz"),
                         std::runtime_error);
  }
  SUBCASE("non-numeric cell is an error") {
    const auto spath = write_text("s5.csv", "sample_id,clip\na,abc\n");
    CHECK_THROWS(load_score_table(spath, m));
  }
  SUBCASE("non-finite cell is an error") {
    const auto spath = write_text("s6.csv", "sample_id,clip\na,inf\n");
    CHECK_THROWS(load_score_table(spath, m));
  }
  SUBCASE("missing header is an error") {
    const auto spath = write_text("s7.csv", "");
    CHECK_THROWS_WITH_AS(load_score_table(spath, m), doctest::Contains("header"),
                         std::runtime_error);
  }
  SUBCASE("duplicate row is an error") {
    const auto spath = write_text("s8.csv", "sample_id,clip\na,0.1\na,0.2\n");
    CHECK_THROWS(load_score_table(spath, m));
  }
}

TEST_CASE("score table round trip through write_score_table") {
  const auto mpath = write_text("m2.jsonl",
      R"({"id":"a","image_path":"","caption":""})" "\n"
      R"({"id":"b","image_path":"","caption":""})" "\n");
  const Manifest m = load_manifest(mpath);
  const auto spath = write_text("s9.csv", "sample_id,clip,icc\na,0.125,\nb,-3.5,1e-3\n");
  const ScoreTable t = load_score_table(spath, m);
  const fs::path out = temp_dir() / "s9_out.csv";
  write_score_table(t, out);
  const ScoreTable back = load_score_table_raw(out);
  REQUIRE(back.rows() == t.rows());
  REQUIRE(back.cols() == t.cols());
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      if (is_missing(t.cells(r, c))) {
        CHECK(is_missing(back.cells(r, c)));
      } else {
        CHECK(back.cells(r, c) == t.cells(r, c));
      }
    }
  }
}

TEST_CASE("load_detections") {
  SUBCASE("parses confidences and defaults absent ids to empty") {
    const auto path = write_text("d1.jsonl",
        R"({"id":"a","confidences":[0.3,0.05]})" "\n");
    const DetectionSet d = load_detections(path);
    CHECK(d.of("a") == std::vector<double>{0.3, 0.05});
    CHECK(d.of("missing").empty());
  }
  SUBCASE("confidence outside [0,1] is an error") {
    const auto path = write_text("d2.jsonl", R"({"id":"a","confidences":[1.2]})" "\n");
    CHECK_THROWS(load_detections(path));
  }
  SUBCASE("malformed line is an error") {
    const auto path = write_text("d3.jsonl", "oops\n");
    CHECK_THROWS(load_detections(path));
  }
}

TEST_CASE("write_subset orders by score then id") {
  const auto mpath = write_text("m3.jsonl",
      R"({"id":"a","image_path":"","caption":""})" "\n"
      R"({"id":"b","image_path":"","caption":""})" "\n"
      R"({"id":"c","image_path":"","caption":""})" "\n");
  const Manifest m = load_manifest(mpath);

  SUBCASE("descending score") {
    const fs::path out = temp_dir() / "subset1.csv";
    write_subset(m, {"a", "b"}, {{"a", 0.9}, {"b", 0.2}}, out);
    std::ifstream in(out);
    std::string l0, l1, l2;
    std::getline(in, l0);
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l0 == "sample_id,quality_score");
    CHECK(l1 == "a,0.9");
    CHECK(l2 == "b,0.2");
  }
  SUBCASE("ties broken by ascending id") {
    const fs::path out = temp_dir() / "subset2.csv";
    write_subset(m, {"b", "a"}, {{"a", 0.5}, {"b", 0.5}}, out);
    std::ifstream in(out);
    std::string l0, l1;
    std::getline(in, l0);
    std::getline(in, l1);
    CHECK(l1 == "a,0.5");
  }
  SUBCASE("unknown id is an error") {
    CHECK_THROWS(write_subset(m, {"zz"}, {{"zz", 1.0}}, temp_dir() / "x.csv"));
  }
}

TEST_CASE("decode_image handles PGM and PPM bit-exactly") {
  SUBCASE("P5 2x2") {
    const auto path = write_bytes("i1.pgm",
        {'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 0, 64, 128, 255});
    const ImageBuffer img = decode_image(path);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.channels == 1);
    CHECK(img.pixels == std::vector<std::uint8_t>{0, 64, 128, 255});
  }
  SUBCASE("P5 truncated payload") {
    const auto path = write_bytes("i2.pgm",
        {'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 0, 64, 128});
    CHECK_THROWS_WITH_AS(decode_image(path), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("P6 1x1") {
    const auto path = write_bytes("i3.ppm",
        {'P', '6', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 10, 20, 30});
    const ImageBuffer img = decode_image(path);
    CHECK(img.channels == 3);
    CHECK(img.pixels == std::vector<std::uint8_t>{10, 20, 30});
  }
  SUBCASE("oversized payload is a mismatch error") {
    const auto path = write_bytes("i4.pgm",
        {'P', '5', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 1, 2});
    CHECK_THROWS_WITH_AS(decode_image(path), doctest::Contains("mismatch"),
                         std::runtime_error);
  }
  SUBCASE("comments in header are fine") {
    const auto path = write_bytes("i5.pgm",
        {'P', '5', '\n', '#', ' ', 'c', '\n', '1', ' ', '1', '\n', '2', '5', '5',
         '\n', 42});
    CHECK(decode_image(path).pixels == std::vector<std::uint8_t>{42});
  }
  SUBCASE("16-bit maxval is unsupported") {
    const auto path = write_bytes("i6.pgm",
        {'P', '5', '\n', '1', ' ', '1', '\n', '6', '5', '5', '3', '5', '\n', 0, 0});
    CHECK_THROWS(decode_image(path));
  }
  SUBCASE("unknown magic is unsupported") {
    const auto path = write_bytes("i7.bin", {'X', 'Y', 0, 1, 2});
    CHECK_THROWS_WITH_AS(decode_image(path), doctest::Contains("unsupported"),
                         std::runtime_error);
  }
  SUBCASE("decoding is byte-deterministic") {
    const auto path = write_bytes("i8.pgm",
        {'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 9, 8, 7, 6});
    CHECK(decode_image(path).pixels == decode_image(path).pixels);
  }
}

TEST_CASE("pgm/ppm writers round trip through decode_image") {
  ImageBuffer gray;
  gray.width = 3;
  gray.height = 2;
  gray.channels = 1;
  gray.pixels = {1, 2, 3, 4, 5, 6};
  const fs::path gpath = temp_dir() / "w1.pgm";
  write_pgm(gray, gpath);
  CHECK(decode_image(gpath).pixels == gray.pixels);

  ImageBuffer rgb;
  rgb.width = 2;
  rgb.height = 1;
  rgb.channels = 3;
  rgb.pixels = {255, 0, 0, 0, 255, 0};
  const fs::path cpath = temp_dir() / "w2.ppm";
  write_ppm(rgb, cpath);
  CHECK(decode_image(cpath).pixels == rgb.pixels);
}

TEST_CASE("PNG decoding is supported") {
  // Write a small PNG with libpng, then read it back through decode_image.
  const fs::path path = temp_dir() / "p1.png";
  std::vector<std::uint8_t> pixels = {250, 100, 20, 30, 60, 90, 5, 6, 7, 8, 9, 10};
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = 2;
  img.height = 2;
  img.format = PNG_FORMAT_RGB;
  REQUIRE(png_image_write_to_file(&img, path.string().c_str(), 0, pixels.data(), 0,
                                  nullptr) != 0);
  const ImageBuffer back = decode_image(path);
  CHECK(back.width == 2);
  CHECK(back.height == 2);
  CHECK(back.channels == 3);
  CHECK(back.pixels == pixels);  // PNG is lossless
}

TEST_CASE("JPEG decoding is supported") {
  const fs::path path = temp_dir() / "j1.jpg";
  const int w = 16, h = 16;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h, 128);
  {
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    FILE* f = std::fopen(path.string().c_str(), "wb");
    REQUIRE(f != nullptr);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = w;
    cinfo.image_height = h;
    cinfo.input_components = 1;
    cinfo.in_color_space = JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 95, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
      JSAMPROW row = pixels.data() + cinfo.next_scanline * w;
      jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
  }
  const ImageBuffer back = decode_image(path);
  CHECK(back.width == w);
  CHECK(back.height == h);
  CHECK(back.channels == 1);
  // Lossy, but a flat field should stay close.
  for (std::uint8_t p : back.pixels) {
    CHECK(std::abs(static_cast<int>(p) - 128) <= 4);
  }
}
