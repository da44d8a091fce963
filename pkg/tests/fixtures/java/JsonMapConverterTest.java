package org.apache.shardingsphere.elasticjob.lite.lifecycle.converter;

import org.junit.Before;
import org.junit.Test;

import java.util.HashMap;
import java.util.Map;

import static org.junit.Assert.assertEquals;
import static org.junit.Assert.assertNull;

public class JsonMapConverterTest {

    private JsonMapConverter converter;

    @Before
    public void setUp() {
        converter = new JsonMapConverter();
    }

    @Test
    public void convertToDatabaseColumn_nullMap() {
        assertNull(converter.convertToDatabaseColumn(null));
    }

    @Test
    public void convertToDatabaseColumn_twoElement() {
        Map<String, String> map = new HashMap<>(8);
        map.put("a", "1");
        map.put("disableCheck", "true");
        String result = converter.convertToDatabaseColumn(map);
        assertEquals("{\"a\":\"1\",\"disableCheck\":\"true\"}", result);
    }
}
