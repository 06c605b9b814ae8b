#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "lod3kit/citygml.hpp"
#include "lod3kit/xml.hpp"

using namespace lod3kit;

TEST_CASE("xml parser handles prolog, nesting and attributes", "[xml]") {
  const char* doc = R"(<?xml version="1.0" encoding="UTF-8"?>
<!-- a comment before the root -->
<root version="2" xmlns:gml="http://www.opengis.net/gml">
  <gml:name>hello</gml:name>
  <item id="a"/>
  <item id="b">text <!-- inner comment --> more</item>
</root>)";
  XmlNode root = xml_parse(doc);
  CHECK(root.name == "root");
  REQUIRE(root.attr("version") != nullptr);
  CHECK(*root.attr("version") == "2");
  REQUIRE(root.child("name") != nullptr);  // matched by local name
  CHECK(root.child("name")->text == "hello");
  auto items = root.all("item");
  REQUIRE(items.size() == 2);
  CHECK(*items[0]->attr("id") == "a");
  CHECK(items[1]->text == "text  more");
}

TEST_CASE("xml entity escaping round-trips", "[xml]") {
  XmlNode n{"doc"};
  n.attrs.emplace_back("q", "a \"b\" <c> & 'd'");
  XmlNode child{"t"};
  child.text = "1 < 2 && 3 > 2 \"quoted\"";
  n.children.push_back(child);
  XmlNode back = xml_parse(xml_write(n));
  REQUIRE(back.attr("q") != nullptr);
  CHECK(*back.attr("q") == "a \"b\" <c> & 'd'");
  REQUIRE(back.child("t") != nullptr);
  CHECK(back.child("t")->text == "1 < 2 && 3 > 2 \"quoted\"");
}

TEST_CASE("xml cdata passes through as text", "[xml]") {
  XmlNode root = xml_parse("<a><![CDATA[x < y & z]]></a>");
  CHECK(root.text == "x < y & z");
}

TEST_CASE("xml parse errors are reported", "[xml]") {
  CHECK_THROWS_AS(xml_parse("<a><b></a></b>"), XmlError);     // mismatched close
  CHECK_THROWS_AS(xml_parse("<a>"), XmlError);                // unterminated
  CHECK_THROWS_AS(xml_parse("plain text"), XmlError);         // no root element
  CHECK_THROWS_AS(xml_parse("<a b=c/>"), XmlError);           // unquoted attribute
  CHECK_THROWS_AS(xml_parse("<a/><b/>"), XmlError);           // content after root
}

// ---------------------------------------------------------------------------
// CityGML fixtures
// ---------------------------------------------------------------------------

namespace {

LinearRing rect_ring_y0(double x0, double z0, double x1, double z1) {
  return LinearRing{{{x0, 0, z0}, {x1, 0, z0}, {x1, 0, z1}, {x0, 0, z1}, {x0, 0, z0}}};
}

// interior rings must oppose the exterior: run z first, then x
LinearRing hole_ring_y0(double x0, double z0, double x1, double z1) {
  return LinearRing{{{x0, 0, z0}, {x0, 0, z1}, {x1, 0, z1}, {x1, 0, z0}, {x0, 0, z0}}};
}

WallSurface make_wall(const std::string& id, double w = 6.0, double h = 3.0) {
  WallSurface ws;
  ws.id = id;
  ws.exterior = rect_ring_y0(0, 0, w, h);
  ws.corners = derive_corners(ws.exterior);
  return ws;
}

CityModel one_wall_model(const WallSurface& ws, Lod lod = Lod::LoD2) {
  Building b;
  b.id = "b1";
  b.lod = lod;
  BuildingMember m;
  m.is_wall = true;
  m.wall = ws;
  b.members.push_back(std::move(m));
  CityMember cm;
  cm.is_building = true;
  cm.building = std::move(b);
  CityModel model;
  model.members.push_back(std::move(cm));
  return model;
}

}  // namespace

TEST_CASE("citygml parse of a handwritten lod2 document", "[citygml]") {
  const char* doc = R"(<?xml version="1.0" encoding="UTF-8"?>
<core:CityModel xmlns:core="http://www.opengis.net/citygml/2.0"
    xmlns:bldg="http://www.opengis.net/citygml/building/2.0"
    xmlns:gml="http://www.opengis.net/gml">
  <core:cityObjectMember>
    <bldg:Building gml:id="house">
      <bldg:measuredHeight uom="m">3.0</bldg:measuredHeight>
      <bldg:boundedBy>
        <bldg:WallSurface gml:id="wall-n">
          <bldg:lod2MultiSurface>
            <gml:MultiSurface>
              <gml:surfaceMember>
                <gml:Polygon>
                  <gml:exterior>
                    <gml:LinearRing>
                      <gml:posList>0 0 0 6 0 0 6 0 3 0 0 3 0 0 0</gml:posList>
                    </gml:LinearRing>
                  </gml:exterior>
                </gml:Polygon>
              </gml:surfaceMember>
            </gml:MultiSurface>
          </bldg:lod2MultiSurface>
        </bldg:WallSurface>
      </bldg:boundedBy>
    </bldg:Building>
  </core:cityObjectMember>
</core:CityModel>)";
  CityModel model = parse_citygml(doc);
  auto buildings = model.buildings();
  REQUIRE(buildings.size() == 1);
  CHECK(buildings[0]->id == "house");
  CHECK(buildings[0]->lod == Lod::LoD2);
  REQUIRE(buildings[0]->members.size() == 2);
  CHECK_FALSE(buildings[0]->members[0].is_wall);  // measuredHeight kept raw
  CHECK(buildings[0]->members[0].raw.find("measuredHeight") != std::string::npos);
  auto walls = buildings[0]->walls();
  REQUIRE(walls.size() == 1);
  CHECK(walls[0]->id == "wall-n");
  CHECK(walls[0]->exterior.vertices.size() == 5);
  CHECK(walls[0]->exterior.closed());

  // derived corners: u spans the 6 m edge, v points down the 3 m edge
  const auto& c = walls[0]->corners;
  CHECK(distance(c[0], c[1]) == Catch::Approx(6.0));
  CHECK(distance(c[0], c[2]) == Catch::Approx(3.0));
  CHECK(c[0].z > c[2].z);  // P1 is a top corner, P3 the one below it
  CHECK(c[1].z > c[3].z);
}

TEST_CASE("citygml parse failures carry a location", "[citygml]") {
  CHECK_THROWS_AS(parse_citygml("<foo/>"), CityGmlError);
  const char* no_id = R"(<CityModel><cityObjectMember><Building>
    </Building></cityObjectMember></CityModel>)";
  CHECK_THROWS_WITH(parse_citygml(no_id), Catch::Matchers::ContainsSubstring("without gml:id"));
  const char* bad_coord = R"(<CityModel><cityObjectMember><Building gml:id="b">
    <boundedBy><WallSurface gml:id="w"><lod2MultiSurface><MultiSurface><surfaceMember>
    <Polygon><exterior><LinearRing><posList>0 0 zero 1 1 1 2 2 2 0 0 0</posList>
    </LinearRing></exterior></Polygon>
    </surfaceMember></MultiSurface></lod2MultiSurface></WallSurface></boundedBy>
    </Building></cityObjectMember></CityModel>)";
  CHECK_THROWS_WITH(parse_citygml(bad_coord),
                    Catch::Matchers::ContainsSubstring("non-numeric"));
}

TEST_CASE("serialize / parse round-trip preserves the model", "[citygml]") {
  WallSurface ws = make_wall("w0");
  LinearRing hole = hole_ring_y0(2, 1, 3, 2);
  ws.interiors.push_back(hole);
  ws.openings.push_back({OpeningKind::Window, "w0_win0", hole});
  CityModel model = one_wall_model(ws, Lod::LoD3);
  quantize_model_mm(model);

  std::string gml = serialize_citygml(model);
  CHECK(gml.find("lod3MultiSurface") != std::string::npos);
  CHECK(gml.find("bldg:Window") != std::string::npos);
  // coordinates carry exactly three decimals
  CHECK(gml.find("6.000 0.000 0.000") != std::string::npos);

  CityModel back = parse_citygml(gml);
  CHECK(models_equal(back, model));
  CHECK(back.buildings()[0]->lod == Lod::LoD3);

  // a second round trip is byte-stable
  CHECK(serialize_citygml(back) == gml);
}

TEST_CASE("raw members survive serialization untouched", "[citygml]") {
  WallSurface ws = make_wall("w0");
  CityModel model = one_wall_model(ws);
  BuildingMember extra;
  extra.raw = "<bldg:function>1000</bldg:function>";
  model.buildings()[0]->members.push_back(extra);

  std::string gml = serialize_citygml(model);
  CHECK(gml.find("<bldg:function>1000</bldg:function>") != std::string::npos);
  CityModel back = parse_citygml(gml);
  REQUIRE(back.buildings()[0]->members.size() == 2);
  CHECK(back.buildings()[0]->members[1].raw == extra.raw);
}

TEST_CASE("serializer refuses invalid geometry", "[citygml]") {
  WallSurface ws = make_wall("w0");
  ws.exterior.vertices.pop_back();  // open the ring
  CityModel model = one_wall_model(ws);
  CHECK_THROWS_AS(serialize_citygml(model), CityGmlError);
}

TEST_CASE("validation accepts a wall with a proper opening", "[citygml]") {
  WallSurface ws = make_wall("w0");
  LinearRing hole = hole_ring_y0(2, 1, 3, 2);
  ws.interiors.push_back(hole);
  ws.openings.push_back({OpeningKind::Door, "d0", hole});
  ValidationReport r = validate_geometry(one_wall_model(ws));
  CHECK(r.ok());
  CHECK(r.to_text().empty());
}

TEST_CASE("validation flags each violation kind", "[citygml]") {
  auto kinds_of = [](const WallSurface& ws) {
    ValidationReport r = validate_geometry(one_wall_model(ws));
    std::string all;
    for (const auto& v : r.violations) all += v.kind + ";";
    return all;
  };

  SECTION("open ring") {
    WallSurface ws = make_wall("w");
    ws.exterior.vertices.back().z += 0.5;
    CHECK(kinds_of(ws).find("open-ring") != std::string::npos);
  }
  SECTION("too few points") {
    WallSurface ws = make_wall("w");
    ws.exterior.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 0, 0}};
    CHECK(kinds_of(ws).find("too-few-points") != std::string::npos);
  }
  SECTION("duplicate consecutive vertex") {
    WallSurface ws = make_wall("w");
    ws.exterior.vertices.insert(ws.exterior.vertices.begin() + 1,
                                ws.exterior.vertices[1]);
    CHECK(kinds_of(ws).find("duplicate-vertex") != std::string::npos);
  }
  SECTION("non-planar ring") {
    WallSurface ws = make_wall("w");
    ws.exterior.vertices[1].y += 0.01;  // 10x the plane tolerance
    CHECK(kinds_of(ws).find("non-planar") != std::string::npos);
  }
  SECTION("self-intersecting exterior") {
    WallSurface ws = make_wall("w");
    ws.exterior =
        LinearRing{{{0, 0, 0}, {6, 0, 3}, {6, 0, 0}, {0, 0, 3}, {0, 0, 0}}};  // bow-tie
    CHECK(kinds_of(ws).find("self-intersection") != std::string::npos);
  }
  SECTION("interior escaping the exterior") {
    WallSurface ws = make_wall("w");
    ws.interiors.push_back(hole_ring_y0(5, 1, 7, 2));  // sticks out at x=7
    CHECK(kinds_of(ws).find("interior-outside") != std::string::npos);
  }
  SECTION("interior touching the exterior boundary") {
    WallSurface ws = make_wall("w");
    ws.interiors.push_back(hole_ring_y0(0, 1, 1, 2));  // shares the x=0 edge
    CHECK(kinds_of(ws).find("interior-outside") != std::string::npos);
  }
  SECTION("interior wound like the exterior") {
    WallSurface ws = make_wall("w");
    ws.interiors.push_back(rect_ring_y0(2, 1, 3, 2));  // same circulation
    CHECK(kinds_of(ws).find("winding") != std::string::npos);
  }
  SECTION("overlapping interiors") {
    WallSurface ws = make_wall("w");
    ws.interiors.push_back(hole_ring_y0(2, 1, 3, 2));
    ws.interiors.push_back(hole_ring_y0(2.5, 1.2, 3.5, 1.8));
    CHECK(kinds_of(ws).find("interior-overlap") != std::string::npos);
  }
  SECTION("opening without a matching interior ring") {
    WallSurface ws = make_wall("w");
    ws.openings.push_back({OpeningKind::Window, "o0", hole_ring_y0(2, 1, 3, 2)});
    CHECK(kinds_of(ws).find("opening-ring-missing") != std::string::npos);
  }
  SECTION("non-finite coordinate") {
    WallSurface ws = make_wall("w");
    ws.exterior.vertices[2].x = std::numeric_limits<double>::infinity();
    CHECK(kinds_of(ws).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("corner derivation on a rotated wall", "[citygml]") {
  // wall plane rotated 30 degrees about z, 4 m wide, 2.5 m tall
  double a = 0.5235987755982988;
  double c = std::cos(a), s = std::sin(a);
  auto at = [&](double along, double up) { return Point3{c * along, s * along, up}; };
  LinearRing ring{{at(0, 0), at(4, 0), at(4, 2.5), at(0, 2.5), at(0, 0)}};
  auto corners = derive_corners(ring);
  CHECK(distance(corners[0], corners[1]) == Catch::Approx(4.0));
  CHECK(distance(corners[0], corners[2]) == Catch::Approx(2.5));
  // v points downward in world z
  CHECK(corners[2].z < corners[0].z);
  CHECK(corners[0].z == Catch::Approx(2.5).margin(1e-9));
  CHECK(corners[2].z == Catch::Approx(0.0).margin(1e-9));
  // frame maps the unit square back onto the wall plane
  WallSurface ws;
  ws.id = "w";
  ws.exterior = ring;
  ws.corners = corners;
  WallFrame f = wall_frame(ws);
  Point3 mid = f.map(0.5, 0.5);
  CHECK(std::abs(-s * mid.x + c * mid.y) < 1e-9);  // on the rotated plane
}

TEST_CASE("mm quantization is idempotent and serializer-exact", "[citygml]") {
  WallSurface ws = make_wall("w");
  ws.exterior.vertices[1].x = 5.9994449;
  CityModel model = one_wall_model(ws);
  quantize_model_mm(model);
  CHECK(model.buildings()[0]->walls()[0]->exterior.vertices[1].x == Catch::Approx(5.999));
  CityModel twice = model;
  quantize_model_mm(twice);
  CHECK(models_equal(model, twice, 0.0));
  // parse(serialize(q)) == q exactly
  CityModel back = parse_citygml(serialize_citygml(model));
  CHECK(models_equal(back, model, 0.0));
}
