package com.example.flow;

import java.lang.reflect.Field;
import java.util.ArrayList;
import java.util.Arrays;
import java.util.HashMap;
import java.util.HashSet;
import java.util.List;
import java.util.Map;
import java.util.Set;

import org.junit.Test;

import static org.junit.Assert.assertEquals;
import static org.junit.Assert.assertTrue;

public class DataflowFixtureTest {

    private final Map<String, Integer> registry = new HashMap<>();

    @Test
    public void integersOnly() {
        int a = 2;
        int b = a * 3;
        assertEquals(6, b);
    }

    @Test
    public void disconnectedMap() {
        Map<String, Integer> counts = new HashMap<>();
        counts.put("x", 1);
        List<String> names = new ArrayList<>();
        names.add("alpha");
        names.add("beta");
        String joinedNames = String.join(",", names);
        assertEquals("alpha,beta", joinedNames);
    }

    @Test
    public void reflectiveFields() {
        Field[] fields = Config.class.getDeclaredFields();
        List<String> names = new ArrayList<>();
        for (Field f : fields) {
            names.add(f.getName());
        }
        assertEquals(Arrays.asList("host", "port"), names);
    }

    @Test
    public void stringifiedSet() {
        Set<String> tags = new HashSet<>();
        tags.add("b");
        tags.add("a");
        String rendered = tags.toString();
        assertEquals("[a, b]", rendered);
    }

    @Test
    public void keySetIteration() {
        registry.put("one", 1);
        registry.put("two", 2);
        StringBuilder sb = new StringBuilder();
        for (String key : registry.keySet()) {
            sb.append(key);
        }
        assertEquals("onetwo", sb.toString());
    }

    @Test
    public void reassignedBeforeUse() {
        Map<String, String> m = new HashMap<>();
        m.put("k", "v");
        m = new java.util.TreeMap<>();
        m.put("k", "v");
        assertTrue(m.toString().startsWith("{k"));
    }

    static class Config {
        String host;
        int port;
    }
}
