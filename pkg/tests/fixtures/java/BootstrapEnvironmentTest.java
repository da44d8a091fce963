package org.apache.shardingsphere.elasticjob.cloud.scheduler.env;

import org.apache.shardingsphere.elasticjob.cloud.ReflectionUtils;
import org.junit.Test;

import java.util.Properties;

import static org.junit.Assert.assertFalse;
import static org.junit.Assert.assertThat;
import static org.hamcrest.CoreMatchers.is;

public final class BootstrapEnvironmentTest {

    private final BootstrapEnvironment bootstrapEnvironment = BootstrapEnvironment.getINSTANCE();

    // OD-Polluter
    @Test
    public void assertGetEventTraceRdbConfigurationMap() {
        Properties properties = new Properties();
        properties.setProperty(BootstrapEnvironment.EVENT_TRACE_RDB_DRIVER, "org.h2.Driver");
        properties.setProperty(BootstrapEnvironment.EVENT_TRACE_RDB_URL, "jdbc:h2:mem:job_event_trace");
        properties.setProperty(BootstrapEnvironment.EVENT_TRACE_RDB_USERNAME, "sa");
        properties.setProperty(BootstrapEnvironment.EVENT_TRACE_RDB_PASSWORD, "password");
        ReflectionUtils.setFieldValue(bootstrapEnvironment, "properties", properties);
        assertThat(bootstrapEnvironment.getJobEventRdbConfigurationMap().size(), is(4));
    }

    // OD-Victim
    @Test
    public void assertWithoutEventTraceRdbConfiguration() {
        assertFalse(bootstrapEnvironment.getTracingConfiguration().isPresent());
    }
}
